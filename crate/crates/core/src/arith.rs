//! Integer and character primitives: Kronecker symbols, fundamental
//! discriminants, squarefree decompositions, prime sieving and divisor
//! functions.

use rug::ops::Pow;
use rug::Integer;
use serde::Serialize;

use crate::error::{Error, Result};

/// Parity of the half-integral weight parameter `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(k: u32) -> Self {
        if k.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// `(-1)^k` as a sign.
    pub fn sign(self) -> i64 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }
}

/// Sign of the discriminants to enumerate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn for_parity(parity: Parity) -> Self {
        match parity {
            Parity::Even => Sign::Positive,
            Parity::Odd => Sign::Negative,
        }
    }

    fn apply(self, x: i64) -> i64 {
        match self {
            Sign::Positive => x,
            Sign::Negative => -x,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidueFilter {
    All,
    /// Keep only `D ≡ 1 (mod 4)`.
    OneModFour,
}

/// A validated fundamental discriminant together with its parity flag
/// (`delta = 0` for `D > 0`, `delta = 1` for `D < 0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FundamentalDiscriminant {
    d: i64,
}

impl FundamentalDiscriminant {
    pub fn new(d: i64) -> Result<Self> {
        check_fundamental(d)?;
        Ok(FundamentalDiscriminant { d })
    }

    /// Caller guarantees `d` is fundamental (used by sieves that already
    /// established it).
    pub(crate) fn new_unchecked(d: i64) -> Self {
        debug_assert!(is_fundamental(d).unwrap_or(false), "{d} is not fundamental");
        FundamentalDiscriminant { d }
    }

    pub fn value(self) -> i64 {
        self.d
    }

    pub fn abs(self) -> u64 {
        self.d.unsigned_abs()
    }

    pub fn parity_delta(self) -> u8 {
        if self.d > 0 {
            0
        } else {
            1
        }
    }

    /// `χ_D(n)`.
    pub fn chi(self, n: i64) -> i8 {
        kronecker_symbol(self.d, n)
    }

    /// `χ_D(-1)`, which is `+1` exactly when `D > 0`.
    pub fn chi_minus_one(self) -> i8 {
        if self.d > 0 {
            1
        } else {
            -1
        }
    }

    /// Values of `χ_D` on `0..|D|`; `χ_D(n) = table[n mod |D|]` for `n ≥ 0`.
    pub fn character_table(self) -> Vec<i8> {
        let q = self.abs() as i64;
        (0..q).map(|n| kronecker_symbol(self.d, n)).collect()
    }
}

impl std::fmt::Display for FundamentalDiscriminant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.d)
    }
}

/// The quadratic character `χ_D(n)` realised as the Kronecker symbol `(D/n)`.
///
/// `D` must be a fundamental discriminant or `±1`.
pub fn kronecker(d: i64, n: i64) -> Result<i8> {
    if d != 1 && d != -1 {
        check_fundamental(d)?;
    }
    Ok(kronecker_symbol(d, n))
}

/// The Kronecker symbol `(a/b)` for arbitrary integers, by binary reciprocity
/// with the explicit 2-adic rules.
pub fn kronecker_symbol(a: i64, b: i64) -> i8 {
    let mut a = a as i128;
    let mut b = b as i128;
    // (-1)^((x^2-1)/8) indexed by x mod 8
    const TAB2: [i8; 8] = [0, 1, 0, -1, 0, -1, 0, 1];

    if b == 0 {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    if a % 2 == 0 && b % 2 == 0 {
        return 0;
    }
    let v = b.trailing_zeros();
    b >>= v;
    let mut k: i8 = if v.is_multiple_of(2) {
        1
    } else {
        TAB2[(a & 7) as usize]
    };
    if b < 0 {
        b = -b;
        if a < 0 {
            k = -k;
        }
    }
    loop {
        // b is odd and positive here
        if a == 0 {
            return if b == 1 { k } else { 0 };
        }
        let v = a.trailing_zeros();
        a >>= v;
        if v % 2 == 1 {
            k *= TAB2[(b & 7) as usize];
        }
        if a & b & 2 != 0 {
            k = -k;
        }
        let r = a.abs();
        a = b % r;
        b = r;
    }
}

fn check_fundamental(d: i64) -> Result<()> {
    if d == 0 {
        return Err(Error::domain("D = 0 is not a discriminant"));
    }
    if d == 1 {
        return Ok(());
    }
    match d.rem_euclid(4) {
        1 => {
            if is_squarefree(d.unsigned_abs()) {
                Ok(())
            } else {
                Err(Error::domain(format!(
                    "D = {d} is 1 mod 4 but not squarefree"
                )))
            }
        }
        0 => {
            let m = d / 4;
            match m.rem_euclid(4) {
                2 | 3 if is_squarefree(m.unsigned_abs()) => Ok(()),
                2 | 3 => Err(Error::domain(format!(
                    "D = {d} = 4m with m = {m} not squarefree"
                ))),
                _ => Err(Error::domain(format!(
                    "D = {d} = 4m with m = {m} not 2 or 3 mod 4"
                ))),
            }
        }
        r => Err(Error::domain(format!("D = {d} is {r} mod 4"))),
    }
}

/// Whether `d` is a fundamental discriminant (`1` included).
pub fn is_fundamental(d: i64) -> Result<bool> {
    if d == 0 {
        return Err(Error::domain("D = 0 is not a discriminant"));
    }
    Ok(check_fundamental(d).is_ok())
}

pub fn is_squarefree(n: u64) -> bool {
    if n == 0 {
        return false;
    }
    let mut n = n;
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return false;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    true
}

/// Trial-division factorisation, ascending primes.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Writes `n = s·t²` with `s` squarefree.
pub fn squarefree_part(n: u64) -> (u64, u64) {
    let mut s = 1;
    let mut t = 1;
    for (p, e) in factorize(n) {
        t *= p.pow(e / 2);
        if e % 2 == 1 {
            s *= p;
        }
    }
    (s, t)
}

/// Writes `n = |D|·m²` with `D` fundamental and `(-1)^k D > 0`.
pub fn squarefree_decompose(n: u64, parity: Parity) -> Result<(FundamentalDiscriminant, u64)> {
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    let (s, t) = squarefree_part(n);
    decompose_from_parts(n, s, t, parity)
}

pub(crate) fn decompose_from_parts(
    n: u64,
    s: u64,
    t: u64,
    parity: Parity,
) -> Result<(FundamentalDiscriminant, u64)> {
    let signed = parity.sign() * n as i64;
    if !matches!(signed.rem_euclid(4), 0 | 1) {
        return Err(Error::domain(format!(
            "(-1)^k n = {signed} is {} mod 4; no decomposition n = |D| m^2",
            signed.rem_euclid(4)
        )));
    }
    let d0 = parity.sign() * s as i64;
    if d0.rem_euclid(4) == 1 {
        Ok((FundamentalDiscriminant::new_unchecked(d0), t))
    } else {
        debug_assert!(t.is_multiple_of(2));
        Ok((FundamentalDiscriminant::new_unchecked(4 * d0), t / 2))
    }
}

/// Fundamental discriminants `D` of the given sign with `lo < |D| ≤ hi`,
/// ascending in `|D|`.
///
/// Uses a segmented squarefree sieve (marking multiples of `p²`) over `|D|`
/// and over `|D|/4`.
pub fn enumerate_discriminants(
    lo: u64,
    hi: u64,
    sign: Sign,
    filter: ResidueFilter,
) -> Result<Vec<FundamentalDiscriminant>> {
    if lo >= hi {
        return Err(Error::domain(format!("need lo < hi, got ({lo}, {hi}]")));
    }
    let mut out = Vec::new();
    let sieve_primes = PrimeTable::new(isqrt(hi) + 1);
    const BLOCK: u64 = 1 << 16;
    let mut start = lo + 1;
    while start <= hi {
        let end = (start + BLOCK - 1).min(hi);
        let sf = squarefree_segment(start, end, &sieve_primes);
        let q_lo = start / 4;
        let q_hi = end / 4 + 1;
        let sf4 = squarefree_segment(q_lo.max(1), q_hi, &sieve_primes);
        for x in start..=end {
            let d = sign.apply(x as i64);
            let fundamental = match d.rem_euclid(4) {
                1 => sf[(x - start) as usize],
                0 => {
                    let m = d / 4;
                    let am = m.unsigned_abs();
                    matches!(m.rem_euclid(4), 2 | 3) && am >= q_lo.max(1) && sf4[(am - q_lo.max(1)) as usize]
                }
                _ => false,
            };
            if !fundamental {
                continue;
            }
            if filter == ResidueFilter::OneModFour && d.rem_euclid(4) != 1 {
                continue;
            }
            out.push(FundamentalDiscriminant::new_unchecked(d));
        }
        start = end + 1;
    }
    Ok(out)
}

/// The family `X < (-1)^k D ≤ 2X`, `D ≡ 1 (mod 4)` summed over throughout the
/// resonance experiments.
pub fn resonance_family(x: u64, parity: Parity) -> Result<Vec<FundamentalDiscriminant>> {
    enumerate_discriminants(x, 2 * x, Sign::for_parity(parity), ResidueFilter::OneModFour)
}

/// Squarefree flags for `lo..=hi` (`lo ≥ 1`).
fn squarefree_segment(lo: u64, hi: u64, primes: &PrimeTable) -> Vec<bool> {
    let mut flags = vec![true; (hi - lo + 1) as usize];
    for &p in primes.primes() {
        let sq = p * p;
        if sq > hi {
            break;
        }
        let mut m = lo.div_ceil(sq) * sq;
        while m <= hi {
            flags[(m - lo) as usize] = false;
            m += sq;
        }
    }
    flags
}

pub fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

pub fn is_square(n: u64) -> bool {
    let r = isqrt(n);
    r * r == n
}

/// All primes up to `limit`, with O(1) membership.
#[derive(Clone, Debug)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
    is_prime: Vec<bool>,
}

impl PrimeTable {
    pub fn new(limit: u64) -> Self {
        let n = limit as usize;
        let mut is_prime = vec![true; n + 1];
        is_prime[0] = false;
        if n >= 1 {
            is_prime[1] = false;
        }
        let mut i = 2;
        while i * i <= n {
            if is_prime[i] {
                let mut j = i * i;
                while j <= n {
                    is_prime[j] = false;
                    j += i;
                }
            }
            i += 1;
        }
        let primes = (0..=n).filter(|&i| is_prime[i]).map(|i| i as u64).collect();
        PrimeTable {
            limit,
            primes,
            is_prime,
        }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn contains(&self, n: u64) -> bool {
        n <= self.limit && self.is_prime[n as usize]
    }

    /// Primes in `lo..=hi`.
    pub fn range(&self, lo: u64, hi: u64) -> &[u64] {
        let a = self.primes.partition_point(|&p| p < lo);
        let b = self.primes.partition_point(|&p| p <= hi);
        &self.primes[a..b.max(a)]
    }
}

/// Smallest-prime-factor table for fast factorisation of `n ≤ limit`.
#[derive(Clone, Debug)]
pub struct FactorTable {
    spf: Vec<u32>,
}

impl FactorTable {
    pub fn new(limit: usize) -> Self {
        assert!(limit < u32::MAX as usize);
        let mut spf = vec![0u32; limit + 1];
        let mut primes = Vec::new();
        for i in 2..=limit {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            for &p in &primes {
                let m = p as usize * i;
                if p > spf[i] || m > limit {
                    break;
                }
                spf[m] = p;
            }
        }
        FactorTable { spf }
    }

    pub fn limit(&self) -> usize {
        self.spf.len() - 1
    }

    pub fn smallest_prime_factor(&self, n: usize) -> u64 {
        self.spf[n] as u64
    }

    pub fn factorize(&self, mut n: usize) -> Vec<(u64, u32)> {
        let mut out: Vec<(u64, u32)> = Vec::new();
        while n > 1 {
            let p = self.spf[n] as usize;
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p as u64, e));
        }
        out
    }

    /// `(s, t)` with `n = s t²`, `s` squarefree.
    pub fn squarefree_part(&self, n: usize) -> (u64, u64) {
        let mut s = 1;
        let mut t = 1;
        for (p, e) in self.factorize(n) {
            t *= p.pow(e / 2);
            if e % 2 == 1 {
                s *= p;
            }
        }
        (s, t)
    }

    pub fn mobius(&self, n: usize) -> i8 {
        let mut mu = 1;
        for (_, e) in self.factorize(n) {
            if e > 1 {
                return 0;
            }
            mu = -mu;
        }
        mu
    }
}

pub fn mobius(n: u64) -> i8 {
    let mut mu = 1;
    for (_, e) in factorize(n) {
        if e > 1 {
            return 0;
        }
        mu = -mu;
    }
    mu
}

/// Number of divisors `d(n)`.
pub fn divisor_count(n: u64) -> u64 {
    factorize(n).iter().map(|&(_, e)| e as u64 + 1).product()
}

pub fn divisors(n: u64) -> Vec<u64> {
    let mut ds = vec![1u64];
    for (p, e) in factorize(n) {
        let len = ds.len();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                ds.push(ds[i] * pk);
            }
        }
    }
    ds.sort_unstable();
    ds
}

/// `σ_power(n)` for `0 ≤ n ≤ limit`, exact (`σ(0)` is stored as 0).
pub fn sigma_table(limit: usize, power: u32) -> Vec<Integer> {
    let fits = (power as f64 + 1.0) * ((limit.max(2)) as f64).log2() < 125.0;
    if fits {
        let mut acc = vec![0u128; limit + 1];
        for d in 1..=limit {
            let dp = (d as u128).pow(power);
            let mut m = d;
            while m <= limit {
                acc[m] += dp;
                m += d;
            }
        }
        acc.into_iter().map(Integer::from).collect()
    } else {
        let mut acc = vec![Integer::new(); limit + 1];
        for d in 1..=limit {
            let dp = Integer::from(d).pow(power);
            let mut m = d;
            while m <= limit {
                acc[m] += &dp;
                m += d;
            }
        }
        acc
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Jacobi symbol `(a/n)` for odd positive `n`.
pub fn jacobi(a: i64, n: u64) -> i8 {
    assert!(n % 2 == 1, "Jacobi symbol needs odd modulus");
    kronecker_symbol(a, n as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Residue-table oracle: Legendre symbols by listing squares, the
    /// 2-adic value by D mod 8, extended by complete multiplicativity.
    fn chi_oracle(d: i64, n: i64) -> i8 {
        if n == 0 {
            return if d.abs() == 1 { 1 } else { 0 };
        }
        let mut val: i8 = if n < 0 && d < 0 { -1 } else { 1 };
        for (p, e) in factorize(n.unsigned_abs()) {
            let lp: i8 = if p == 2 {
                match d.rem_euclid(8) {
                    1 | 7 => 1,
                    3 | 5 => -1,
                    _ => 0,
                }
            } else {
                let r = d.rem_euclid(p as i64) as u64;
                if r == 0 {
                    0
                } else if (1..p).any(|x| x * x % p == r) {
                    1
                } else {
                    -1
                }
            };
            val *= lp.pow(e);
        }
        val
    }

    fn fundamentals_upto(bound: i64) -> Vec<i64> {
        (-bound..=bound)
            .filter(|&d| d != 0 && is_fundamental(d).unwrap())
            .collect()
    }

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker(1, 7).unwrap(), 1);
        assert_eq!(kronecker(5, 2).unwrap(), -1);
        assert_eq!(kronecker(8, 3).unwrap(), -1);
        assert!(kronecker(9, 2).is_err());
        assert!(kronecker(-1, 3).is_ok());
    }

    #[test]
    fn kronecker_matches_residue_oracle() {
        for d in fundamentals_upto(200) {
            for n in -60..=300 {
                assert_eq!(kronecker_symbol(d, n), chi_oracle(d, n), "D={d} n={n}");
            }
        }
    }

    #[test]
    fn kronecker_is_periodic_and_vanishes_on_common_factors() {
        for d in fundamentals_upto(120) {
            let q = d.abs();
            for n in 0..3 * q {
                assert_eq!(kronecker_symbol(d, n), kronecker_symbol(d, n + q));
                let g = gcd(n.unsigned_abs(), q as u64);
                assert_eq!(kronecker_symbol(d, n) == 0, g > 1 || (n == 0 && q > 1));
            }
        }
    }

    #[test]
    fn complete_multiplicativity() {
        for d in fundamentals_upto(100) {
            for m in 1..=200i64 {
                for n in (1..=1000i64).step_by(7) {
                    assert_eq!(
                        kronecker_symbol(d, m * n),
                        kronecker_symbol(d, m) * kronecker_symbol(d, n)
                    );
                }
            }
        }
    }

    #[test]
    fn sign_rule_ties_parity_delta() {
        for d in fundamentals_upto(1000) {
            let fd = FundamentalDiscriminant::new(d).unwrap();
            assert_eq!(fd.chi(-1) == 1, d > 0);
            assert_eq!(fd.parity_delta() == 0, d > 0);
            assert_eq!(fd.chi(-1), fd.chi_minus_one());
        }
    }

    #[test]
    fn is_fundamental_examples() {
        assert!(is_fundamental(1).unwrap());
        assert!(!is_fundamental(9).unwrap());
        assert!(is_fundamental(12).unwrap());
        assert!(is_fundamental(-3).unwrap());
        assert!(is_fundamental(-4).unwrap());
        assert!(is_fundamental(-8).unwrap());
        assert!(!is_fundamental(-1).unwrap());
        assert!(!is_fundamental(16).unwrap());
        assert!(is_fundamental(0).is_err());
    }

    #[test]
    fn decompose_examples() {
        let (d, m) = squarefree_decompose(4, Parity::Even).unwrap();
        assert_eq!((d.value(), m), (1, 2));
        let (d, m) = squarefree_decompose(45, Parity::Even).unwrap();
        assert_eq!((d.value(), m), (5, 3));
        let (d, m) = squarefree_decompose(8, Parity::Even).unwrap();
        assert_eq!((d.value(), m), (8, 1));
        let (d, m) = squarefree_decompose(3, Parity::Odd).unwrap();
        assert_eq!((d.value(), m), (-3, 1));
        let (d, m) = squarefree_decompose(16, Parity::Odd).unwrap();
        assert_eq!((d.value(), m), (-4, 2));
        assert!(squarefree_decompose(6, Parity::Even).is_err());
        assert!(squarefree_decompose(3, Parity::Even).is_err());
        assert!(squarefree_decompose(5, Parity::Odd).is_err());
    }

    #[test]
    fn decompose_is_unique_and_consistent() {
        for parity in [Parity::Even, Parity::Odd] {
            for n in 1..3000u64 {
                let ok = matches!((parity.sign() * n as i64).rem_euclid(4), 0 | 1);
                match squarefree_decompose(n, parity) {
                    Ok((d, m)) => {
                        assert!(ok);
                        assert_eq!(d.abs() * m * m, n);
                        assert!(parity.sign() * d.value() > 0);
                        // uniqueness: no other (D', m') works
                        let count = (1..=isqrt(n))
                            .filter(|&mm| n % (mm * mm) == 0)
                            .filter(|&mm| {
                                let dd = parity.sign() * (n / (mm * mm)) as i64;
                                is_fundamental(dd).unwrap()
                            })
                            .count();
                        assert_eq!(count, 1, "n={n}");
                    }
                    Err(_) => assert!(!ok),
                }
            }
        }
    }

    #[test]
    fn enumerate_examples() {
        let v: Vec<i64> = enumerate_discriminants(0, 15, Sign::Positive, ResidueFilter::OneModFour)
            .unwrap()
            .iter()
            .map(|d| d.value())
            .collect();
        assert_eq!(v, vec![1, 5, 13]);
        let v: Vec<i64> = enumerate_discriminants(0, 10, Sign::Positive, ResidueFilter::All)
            .unwrap()
            .iter()
            .map(|d| d.value())
            .collect();
        assert_eq!(v, vec![1, 5, 8]);
        let v: Vec<i64> = enumerate_discriminants(0, 3, Sign::Negative, ResidueFilter::All)
            .unwrap()
            .iter()
            .map(|d| d.value())
            .collect();
        assert_eq!(v, vec![-3]);
        assert!(enumerate_discriminants(5, 5, Sign::Positive, ResidueFilter::All).is_err());
    }

    #[test]
    fn enumerate_matches_brute_force() {
        for sign in [Sign::Positive, Sign::Negative] {
            for filter in [ResidueFilter::All, ResidueFilter::OneModFour] {
                let got: Vec<i64> = enumerate_discriminants(1000, 140_000, sign, filter)
                    .unwrap()
                    .iter()
                    .map(|d| d.value())
                    .collect();
                let want: Vec<i64> = (1001..=140_000i64)
                    .map(|x| sign.apply(x))
                    .filter(|&d| is_fundamental(d).unwrap())
                    .filter(|&d| filter == ResidueFilter::All || d.rem_euclid(4) == 1)
                    .collect();
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn family_count_matches_brute_force() {
        for x in [1u64, 10, 1000, 30_000, 100_000] {
            let fam = resonance_family(x, Parity::Even).unwrap();
            let brute = ((x + 1)..=(2 * x))
                .filter(|&d| d % 4 == 1 && is_squarefree(d))
                .count();
            assert_eq!(fam.len(), brute, "X={x}");
        }
    }

    /// `½(χ₀(D)+χ₋₄(D)) Σ_{a²|D, a odd} μ(a)` is the indicator of squarefree
    /// `D ≡ 1 (mod 4)`.
    #[test]
    fn odd_squarefree_indicator_identity() {
        for d in -10_000i64..=10_000 {
            if d == 0 {
                continue;
            }
            let chi0 = if d % 2 != 0 { 1 } else { 0 };
            let chi4 = kronecker_symbol(-4, d);
            let mut s = 0i64;
            let mut a = 1u64;
            while a * a <= d.unsigned_abs() {
                if d.unsigned_abs() % (a * a) == 0 {
                    s += mobius(a) as i64;
                }
                a += 2;
            }
            let lhs = (chi0 + chi4 as i64) * s;
            let rhs = if d.rem_euclid(4) == 1 && is_squarefree(d.unsigned_abs()) {
                2
            } else {
                0
            };
            assert_eq!(lhs, rhs, "D={d}");
        }
    }

    #[test]
    fn prime_table_and_factor_table() {
        let t = PrimeTable::new(100);
        assert_eq!(t.primes().len(), 25);
        assert!(t.contains(97) && !t.contains(91));
        assert_eq!(t.range(11, 30), &[11, 13, 17, 19, 23, 29]);
        let f = FactorTable::new(10_000);
        for n in 2..10_000 {
            assert_eq!(f.factorize(n), factorize(n as u64));
            assert_eq!(f.mobius(n), mobius(n as u64));
        }
    }

    #[test]
    fn sigma_table_small() {
        let s3 = sigma_table(10, 3);
        assert_eq!(s3[1], 1);
        assert_eq!(s3[2], 9);
        let s5 = sigma_table(10, 5);
        assert_eq!(s5[2], 33);
        let s1 = sigma_table(9, 1);
        assert_eq!(s1[9], 13);
        assert_eq!(divisor_count(12), 6);
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
    }

    proptest! {
        #[test]
        fn kronecker_multiplicative_random(d in -5000i64..5000, m in 1i64..100_000, n in 1i64..100_000) {
            prop_assume!(d != 0 && is_fundamental(d).unwrap());
            prop_assert_eq!(kronecker_symbol(d, m * n), kronecker_symbol(d, m) * kronecker_symbol(d, n));
        }
    }
}
