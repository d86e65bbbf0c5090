//! Central values of quadratic twists through the approximate functional
//! equation, Dirichlet L-values, half-integral weight Dirichlet series in
//! their region of absolute convergence, and a Stirling Γ function.

use std::fmt::Write as _;
use std::sync::OnceLock;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::arith::{FundamentalDiscriminant, PrimeTable};
use crate::error::{Error, Result};
use crate::halfint::PlusForm;
use crate::modforms::{format_float, Eigenform, NormalizedCoeffTable};

/// An evaluated L-value with the bound on what was left out.
#[derive(Clone, Debug)]
pub struct LValue {
    pub value: Float,
    pub tail_bound: f64,
    pub truncation: u64,
    pub bits: u32,
    /// Set when the tail bound could not be pushed below `2^{−bits/2}`.
    pub degraded: bool,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct LValueReport {
    #[serde(rename = "L")]
    pub value: String,
    pub tail_bound: f64,
    #[serde(rename = "T")]
    pub truncation: u64,
    pub bits: u32,
    pub degraded: bool,
}

impl LValue {
    fn exact_zero(bits: u32) -> Self {
        LValue {
            value: Float::with_val(bits, 0),
            tail_bound: 0.0,
            truncation: 0,
            bits,
            degraded: false,
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }

    pub fn target(bits: u32) -> f64 {
        (-(bits as f64) / 2.0).exp2()
    }

    /// True when the value lies below zero by more than its tail bound.
    pub fn is_negative_beyond_tail(&self) -> bool {
        self.value.to_f64() < -self.tail_bound
    }

    pub fn report(&self) -> LValueReport {
        LValueReport {
            value: format_float(&Float::with_val(self.bits, &self.value)),
            tail_bound: self.tail_bound,
            truncation: self.truncation,
            bits: self.bits,
            degraded: self.degraded,
        }
    }
}

/// `Q(k, y) = e^{−y} Σ_{j<k} y^j/j!`, the regularized upper incomplete Γ
/// at integer order.
pub fn regularized_upper_gamma(k: u32, y: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..k {
        term *= y / j as f64;
        sum += term;
    }
    (-y).exp() * sum
}

pub fn regularized_upper_gamma_float(k: u32, y: &Float) -> Float {
    let prec = y.prec();
    let mut term = Float::with_val(prec, 1);
    let mut sum = Float::with_val(prec, 1);
    for j in 1..k {
        term *= y;
        term /= j;
        sum += &term;
    }
    let e = Float::with_val(prec, -y).exp();
    sum * e
}

/// Bound on `2 Σ_{n>t} d(n) n^{−1/2} Q(k, 2πn/|D|)` using `d(n) ≤ 2√n` and
/// `Q(k,y) ≤ e^{−y}(1+y)^{k−1}`.
pub fn afe_tail_bound(k: u32, abs_d: u64, t: u64) -> f64 {
    let c = 2.0 * std::f64::consts::PI / abs_d as f64;
    let y = c * (t + 1) as f64;
    let km1 = (k - 1) as f64;
    if y <= km1 {
        return f64::INFINITY;
    }
    let decay = c * (1.0 - km1 / (1.0 + y - c));
    if decay <= 0.0 {
        return f64::INFINITY;
    }
    let first = 2.0 * (-y + km1 * (1.0 + y).ln()).exp();
    2.0 * first / (1.0 - (-decay).exp())
}

/// Truncation for the central value: start at `⌈|D|(k + 0.7·bits)/2π⌉`,
/// then shrink to the least `T` whose tail bound stays below `2^{−bits/2}`.
pub fn afe_truncation(k: u32, abs_d: u64, bits: u32) -> u64 {
    let target = LValue::target(bits);
    let mut hi = (abs_d as f64 * (k as f64 + 0.7 * bits as f64) / (2.0 * std::f64::consts::PI)).ceil() as u64;
    while afe_tail_bound(k, abs_d, hi) >= target {
        hi = hi + hi / 4 + 1;
    }
    let mut lo = 0;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if afe_tail_bound(k, abs_d, mid) < target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Central values `L(f, χ_D, k)` for one eigenform over many discriminants,
/// sharing a table of normalized coefficients.
#[derive(Clone, Debug)]
pub struct TwistedLValues {
    k: u32,
    bits: u32,
    table: NormalizedCoeffTable,
}

impl TwistedLValues {
    /// Table sized for every `|D| ≤ max_abs_d` at `bits`.
    pub fn new(f: &Eigenform, max_abs_d: u64, bits: u32) -> Result<Self> {
        let limit = afe_truncation(f.k(), max_abs_d.max(1), bits);
        Self::with_limit(f, limit as usize, bits)
    }

    pub fn with_limit(f: &Eigenform, limit: usize, bits: u32) -> Result<Self> {
        let precise = (bits > 53).then_some(bits);
        Ok(TwistedLValues {
            k: f.k(),
            bits,
            table: f.normalized_table(limit, precise)?,
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn limit(&self) -> u64 {
        self.table.limit() as u64
    }

    /// Whether the root number `(−1)^k χ_D(−1)` is `−1`.
    pub fn vanishes_by_parity(&self, d: FundamentalDiscriminant) -> bool {
        (if self.k.is_multiple_of(2) { 1 } else { -1 }) * d.chi_minus_one() < 0
    }

    pub fn value(&self, d: FundamentalDiscriminant) -> Result<LValue> {
        if self.vanishes_by_parity(d) {
            return Ok(LValue::exact_zero(self.bits));
        }
        self.value_at(d, afe_truncation(self.k, d.abs(), self.bits))
    }

    /// The AFE sum truncated at `t`.
    pub fn value_at(&self, d: FundamentalDiscriminant, t: u64) -> Result<LValue> {
        if self.vanishes_by_parity(d) {
            return Ok(LValue::exact_zero(self.bits));
        }
        if t > self.limit() {
            let largest = PrimeTable::new(t).primes().last().copied().unwrap_or(1);
            return Err(Error::TableExhausted {
                needed: largest,
                available: self.limit(),
            });
        }
        let chi = d.character_table();
        let m = chi.len();
        let abs_d = d.abs();
        let tail_bound = afe_tail_bound(self.k, abs_d, t);
        let value = match self.table.precise() {
            None => {
                let c = 2.0 * std::f64::consts::PI / abs_d as f64;
                let lam = self.table.values();
                let mut acc = 0.0;
                for n in 1..=t as usize {
                    let x = chi[n % m];
                    if x == 0 {
                        continue;
                    }
                    let w = regularized_upper_gamma(self.k, c * n as f64);
                    let term = lam[n] * w / (n as f64).sqrt();
                    if x > 0 {
                        acc += term;
                    } else {
                        acc -= term;
                    }
                }
                Float::with_val(self.bits, 2.0 * acc)
            }
            Some((wp, lam)) => {
                let two_pi = Float::with_val(wp, rug::float::Constant::Pi) * 2u32;
                let c = two_pi / abs_d;
                let mut acc = Float::with_val(wp, 0);
                for n in 1..=t as usize {
                    let x = chi[n % m];
                    if x == 0 {
                        continue;
                    }
                    let y = Float::with_val(wp, &c * n as u64);
                    let w = regularized_upper_gamma_float(self.k, &y);
                    let root = Float::with_val(wp, n as u64).sqrt();
                    let term = Float::with_val(wp, &lam[n] * &w) / root;
                    if x > 0 {
                        acc += term;
                    } else {
                        acc -= term;
                    }
                }
                Float::with_val(self.bits, acc * 2u32)
            }
        };
        let out = LValue {
            value,
            tail_bound,
            truncation: t,
            bits: self.bits,
            degraded: tail_bound >= LValue::target(self.bits),
        };
        if out.is_negative_beyond_tail() {
            log::warn!("central value for D = {d} is negative beyond its tail bound: {}", out.to_f64());
        }
        Ok(out)
    }
}

/// `L(f, χ_D, k)` at the centre of the critical strip.
pub fn central_lvalue(f: &Eigenform, d: FundamentalDiscriminant, bits: u32) -> Result<LValue> {
    let k = f.k();
    if (if k.is_multiple_of(2) { 1 } else { -1 }) * d.chi_minus_one() < 0 {
        return Ok(LValue::exact_zero(bits));
    }
    TwistedLValues::new(f, d.abs(), bits)?.value(d)
}

/// `D,parity,L,tail_bound,T` rows, parity being `even` or `odd` after
/// `χ_D(−1)`.
pub fn lvalue_csv<'a>(rows: impl IntoIterator<Item = (FundamentalDiscriminant, &'a LValue)>) -> String {
    let mut out = String::from("D,parity,L,tail_bound,T\n");
    for (d, l) in rows {
        let r = l.report();
        let parity = if d.chi_minus_one() > 0 { "even" } else { "odd" };
        let _ = writeln!(out, "{},{},{},{:e},{}", d, parity, r.value, r.tail_bound, r.truncation);
    }
    out
}

fn bernoulli_even() -> &'static [Rational] {
    static B: OnceLock<Vec<Rational>> = OnceLock::new();
    B.get_or_init(|| {
        // B_0..B_m from Σ_{i≤m} C(m+1,i) B_i = 0
        let m = 120usize;
        let mut b: Vec<Rational> = Vec::with_capacity(m + 1);
        b.push(Rational::from(1));
        for n in 1..=m {
            let mut s = Rational::new();
            let mut binom = Integer::from(1);
            for (i, bi) in b.iter().enumerate() {
                s += Rational::from(&binom * bi);
                binom *= (n + 1 - i) as u64;
                binom /= (i + 1) as u64;
            }
            b.push(-s / Rational::from(n as u64 + 1));
        }
        b.into_iter().step_by(2).collect()
    })
}

/// `Γ(s)` by Stirling's series after shifting the argument upward; reflection
/// below 1/2.
pub fn real_gamma(s: &Float) -> Result<Float> {
    let bits = s.prec();
    if s.is_integer() && *s <= 0 {
        return Err(Error::domain(format!("Γ has a pole at {}", s.to_f64())));
    }
    if !s.is_finite() {
        return Err(Error::domain("Γ of a non-finite argument"));
    }
    let wp = bits + 32 + (s.to_f64().abs() + 2.0).log2().ceil() as u32 * 2;
    if *s < 0.5 {
        // Γ(s) = π / (sin(πs) Γ(1−s))
        let pi = Float::with_val(wp, rug::float::Constant::Pi);
        let x = Float::with_val(wp, s);
        let sin = Float::with_val(wp, &pi * &x).sin();
        let one_minus = Float::with_val(wp, 1 - x);
        let g = real_gamma(&one_minus)?;
        return Ok(Float::with_val(bits, pi / (sin * g)));
    }
    let target = 0.5 * bits as f64 + 10.0;
    let mut z = Float::with_val(wp, s);
    let mut prod = Float::with_val(wp, 1);
    while z < target {
        prod *= &z;
        z += 1;
    }
    // ln Γ(z) = (z−½)ln z − z + ½ln 2π + Σ B_{2j}/(2j(2j−1)z^{2j−1})
    let ln_z = Float::with_val(wp, z.ln_ref());
    let half_ln_2pi = Float::with_val(wp, Float::with_val(wp, rug::float::Constant::Pi) * 2u32).ln() / 2u32;
    let mut lg = Float::with_val(wp, &z - 0.5f64) * &ln_z - &z + half_ln_2pi;
    let z2 = Float::with_val(wp, &z * &z);
    let mut zpow = z.clone();
    let eps = Float::with_val(wp, Float::i_exp(1, -(wp as i32)));
    let bern = bernoulli_even();
    let mut converged = false;
    for (j, b) in bern.iter().enumerate().skip(1) {
        let j = j as u64;
        let denom = Integer::from(2 * j * (2 * j - 1));
        let term = Float::with_val(wp, b) / denom / &zpow;
        lg += &term;
        if Float::with_val(wp, term.abs_ref()) < eps {
            converged = true;
            break;
        }
        zpow *= &z2;
    }
    if !converged {
        return Err(Error::precision("Stirling series did not converge"));
    }
    Ok(Float::with_val(bits, lg.exp() / prod))
}

/// `L(χ_D, s) = Σ χ_D(n) n^{−s}` for real `s > 1`.
///
/// For `D = 1` the tail after `T` is handled by Euler–Maclaurin; otherwise
/// the partial sum carries the bound `2√|D| log(4|D|) T^{−s}`.
pub fn dirichlet_lvalue(d: FundamentalDiscriminant, s: f64, bits: u32) -> Result<LValue> {
    if !(s > 1.0) {
        return Err(Error::domain(format!("Dirichlet series needs s > 1, got {s}")));
    }
    let target = LValue::target(bits);
    let wp = bits + 24;
    let sf = Float::with_val(wp, s);
    let pow_neg = |n: u64| -> Float {
        let x = Float::with_val(wp, n);
        let l = x.ln();
        Float::with_val(wp, -(l * &sf)).exp()
    };
    if d.value() == 1 {
        return Ok(zeta_euler_maclaurin(s, bits));
    }
    let abs_d = d.abs() as f64;
    let c = 2.0 * abs_d.sqrt() * (4.0 * abs_d).ln();
    let cap: f64 = (1u64 << 24) as f64;
    let t = (c / target).powf(1.0 / s).ceil().min(cap).max(1.0) as u64;
    let chi = d.character_table();
    let m = chi.len();
    let mut acc = Float::with_val(wp, 0);
    for n in 1..=t {
        let x = chi[(n as usize) % m];
        if x == 0 {
            continue;
        }
        let term = pow_neg(n);
        if x > 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    let tail_bound = c * (t as f64).powf(-s);
    Ok(LValue {
        value: Float::with_val(bits, acc),
        tail_bound,
        truncation: t,
        bits,
        degraded: tail_bound >= target,
    })
}

fn zeta_euler_maclaurin(s: f64, bits: u32) -> LValue {
    let wp = bits + 24;
    let sf = Float::with_val(wp, s);
    let n = (bits as u64).max(16);
    let pow = |x: &Float, e: &Float| -> Float { (Float::with_val(wp, x.ln_ref()) * e).exp() };
    let mut acc = Float::with_val(wp, 0);
    for j in 1..n {
        acc += pow(&Float::with_val(wp, j), &Float::with_val(wp, -&sf));
    }
    let nf = Float::with_val(wp, n);
    let n_pow = pow(&nf, &Float::with_val(wp, -&sf));
    acc += Float::with_val(wp, &n_pow * &nf) / Float::with_val(wp, &sf - 1u32);
    acc += Float::with_val(wp, &n_pow / 2u32);
    // Σ_j B_{2j}/(2j)! · s(s+1)…(s+2j−2) · N^{−s−2j+1}
    let bern = bernoulli_even();
    let mut rising = sf.clone();
    let mut fact = Integer::from(2);
    let mut npow = Float::with_val(wp, &n_pow / &nf);
    let mut last = f64::INFINITY;
    for (j, b) in bern.iter().enumerate().skip(1) {
        let term = Float::with_val(wp, b) * &rising / &fact * &npow;
        let mag = term.to_f64().abs();
        if mag > last {
            break;
        }
        acc += &term;
        last = mag;
        if mag < (-(wp as f64)).exp2() {
            break;
        }
        let j = j as u64;
        rising *= Float::with_val(wp, &sf + (2 * j - 1)) * Float::with_val(wp, &sf + 2 * j);
        fact *= (2 * j + 1) * (2 * j + 2);
        npow /= Float::with_val(wp, &nf * &nf);
    }
    let tail_bound = last.max((-(bits as f64)).exp2());
    LValue {
        value: Float::with_val(bits, acc),
        tail_bound,
        truncation: n,
        bits,
        degraded: tail_bound >= LValue::target(bits),
    }
}

/// `L(g, s) = Σ c(n) n^{−s}` for `s > k/2 + 3/2`, with the tail bounded by
/// twice the stored Hecke-bound witness.
pub fn hecke_lvalue_halfint(g: &PlusForm, s: f64, bits: u32) -> Result<LValue> {
    let a = g.k() as f64 / 2.0 + 0.25;
    if !(s > a + 1.0 + 0.25) {
        return Err(Error::domain(format!(
            "s = {s} outside the region s > {} of absolute convergence with margin",
            a + 1.25
        )));
    }
    let n_terms = g.prec().saturating_sub(1) as u64;
    partial_dirichlet(n_terms, s, bits, 2.0 * g.hecke_witness(), a, |n| {
        g.is_nonzero(n as usize).then(|| g.coeff_float(n as usize, bits + 24))
    })
}

/// `Σ_{n≤N} c(n) n^{−s}` with the tail `Σ_{n>N} C n^{a−s}`.
pub(crate) fn partial_dirichlet(
    n_terms: u64,
    s: f64,
    bits: u32,
    c: f64,
    a: f64,
    coeff: impl Fn(u64) -> Option<Float>,
) -> Result<LValue> {
    let wp = bits + 24;
    let sf = Float::with_val(wp, s);
    let mut acc = Float::with_val(wp, 0);
    for n in 1..=n_terms {
        if let Some(cn) = coeff(n) {
            let w = Float::with_val(wp, -(Float::with_val(wp, n).ln() * &sf)).exp();
            acc += cn * w;
        }
    }
    let tail_bound = power_tail(c, s - a, n_terms);
    Ok(LValue {
        value: Float::with_val(bits, acc),
        tail_bound,
        truncation: n_terms,
        bits,
        degraded: tail_bound >= LValue::target(bits),
    })
}

/// `Σ_{n>N} C n^{−b}` for `b > 1`, bounded by `C((N+1)^{−b} + (N+1)^{1−b}/(b−1))`.
pub(crate) fn power_tail(c: f64, b: f64, n_terms: u64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    let n1 = (n_terms + 1) as f64;
    c * (n1.powf(-b) + n1.powf(1.0 - b) / (b - 1.0))
}

/// `Σ_{p≤x} a(p) a₂(p) log p / p^{2k−1}`.
pub fn rankin_sum(f: &Eigenform, f2: &Eigenform, x: f64) -> Result<f64> {
    if f.weight() != f2.weight() {
        return Err(Error::domain("eigenforms of different weight"));
    }
    if x < 2.0 {
        return Ok(0.0);
    }
    let x = x.floor() as u64;
    let available = f.prec_primes().min(f2.prec_primes());
    let primes = PrimeTable::new(x);
    if let Some(&p) = primes.primes().last() {
        if p > available {
            return Err(Error::TableExhausted { needed: p, available });
        }
    }
    let mut acc = 0.0;
    for &p in primes.primes() {
        acc += f.normalized_prime_coeff(p)? * f2.normalized_prime_coeff(p)? * (p as f64).ln();
    }
    Ok(acc)
}

/// `L(f, s) = ∏_p (1 − a(p)p^{−s} + p^{2k−1−2s})^{−1}` over the stored primes
/// for `s > k + 1/2`, with a bound on the omitted primes.
pub fn hecke_euler_product(f: &Eigenform, s: f64, bits: u32) -> Result<LValue> {
    let k = f.k() as f64;
    if !(s > k + 0.5) {
        return Err(Error::domain(format!("Euler product needs s > k + 1/2, got {s}")));
    }
    let wp = bits + 24;
    let sf = Float::with_val(wp, s);
    let w1 = f.weight() - 1;
    let mut acc = Float::with_val(wp, 1);
    for &p in f.primes() {
        let ps = Float::with_val(wp, -(Float::with_val(wp, p).ln() * &sf)).exp();
        let a = f.prime_coeff(p)?.to_float(wp);
        let p2k = Float::with_val(wp, Integer::from(p).pow(w1));
        let local = Float::with_val(wp, 1) - Float::with_val(wp, &a * &ps) + p2k * Float::with_val(wp, &ps * &ps);
        if local.is_zero() {
            return Err(Error::domain("vanishing Euler factor"));
        }
        acc /= local;
    }
    // |log L_p| ≤ 2(2p^{k−1/2−s}) for the omitted p; sum over p > P by an integral
    let big_p = f.prec_primes() as f64;
    let e = s - k + 0.5;
    let tail_log = 4.0 * big_p.powf(1.0 - e) / (e - 1.0) * 1.1;
    let tail_bound = acc.to_f64().abs() * (tail_log.exp() - 1.0);
    Ok(LValue {
        value: Float::with_val(bits, acc),
        tail_bound,
        truncation: f.prec_primes(),
        bits,
        degraded: tail_bound >= LValue::target(bits),
    })
}

/// `ζ(s)` for `s > 1`.
pub fn zeta(s: f64, bits: u32) -> LValue {
    zeta_euler_maclaurin(s, bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{enumerate_discriminants, ResidueFilter, Sign};
    use crate::modforms::hecke_eigenforms;
    use rand::{Rng, SeedableRng};

    fn pi(prec: u32) -> Float {
        Float::with_val(prec, rug::float::Constant::Pi)
    }

    #[test]
    fn window_values() {
        assert_eq!(regularized_upper_gamma(6, 0.0), 1.0);
        for y in [0.1, 1.0, 3.7] {
            assert!((regularized_upper_gamma(1, y) - (-y as f64).exp()).abs() < 1e-16);
        }
        assert!((regularized_upper_gamma(2, 1.0) - 2.0 * (-1f64).exp()).abs() < 1e-16);
        assert!((regularized_upper_gamma(2, 1.0) - 0.735758882342885).abs() < 1e-14);
        // bounds and monotonicity
        let mut prev = 1.0;
        for i in 0..400 {
            let y = i as f64 * 0.1;
            let q = regularized_upper_gamma(12, y);
            assert!((0.0..=1.0).contains(&q) && q <= prev + 1e-16);
            assert!(q <= (-y).exp() * (1.0 + y).powi(11) * (1.0 + 1e-12));
            prev = q;
        }
        let y = Float::with_val(128, 2.5);
        let a = regularized_upper_gamma_float(7, &y).to_f64();
        assert!((a - regularized_upper_gamma(7, 2.5)).abs() < 1e-15);
    }

    #[test]
    fn gamma_against_mpfr() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for bits in [64u32, 128, 256] {
            for _ in 0..40 {
                let s = Float::with_val(bits, rng.gen_range(-20.0..60.0f64));
                let ours = real_gamma(&s).unwrap();
                let reference = Float::with_val(bits + 64, &s).gamma();
                let rel = Float::with_val(bits + 64, &ours - &reference) / &reference;
                assert!(rel.to_f64().abs() < (-(bits as f64) + 8.0).exp2(), "s = {s}");
            }
        }
    }

    #[test]
    fn gamma_classical_values() {
        let b = 128;
        assert_eq!(real_gamma(&Float::with_val(b, 1)).unwrap(), 1);
        let half = real_gamma(&Float::with_val(b, 0.5)).unwrap();
        let rp = pi(b).sqrt();
        assert!((Float::with_val(b, &half - &rp) / &rp).to_f64().abs() < 1e-36);
        let g = real_gamma(&Float::with_val(b, 3.5)).unwrap();
        let expected = pi(b).sqrt() * 15u32 / 8u32;
        assert!((Float::with_val(b, &g - &expected) / &expected).to_f64().abs() < 1e-36);
        assert!(real_gamma(&Float::with_val(b, 0)).is_err());
        assert!(real_gamma(&Float::with_val(b, -3)).is_err());
    }

    #[test]
    fn bernoulli_prefix() {
        let b = bernoulli_even();
        assert_eq!(b[0], 1);
        assert_eq!(b[1], Rational::from((1, 6)));
        assert_eq!(b[2], Rational::from((-1, 30)));
        assert_eq!(b[6], Rational::from((691 * 2, -2730 * 2)));
    }

    #[test]
    fn zeta_two() {
        let one = FundamentalDiscriminant::new(1).unwrap();
        let l = dirichlet_lvalue(one, 2.0, 128).unwrap();
        let expected = pi(128).square() / 6u32;
        assert!((Float::with_val(128, &l.value - &expected)).to_f64().abs() < 1e-30);
        assert!(!l.degraded);
        assert!(dirichlet_lvalue(one, 1.0, 64).is_err());
    }

    #[test]
    fn dirichlet_against_euler_product() {
        let d = FundamentalDiscriminant::new(5).unwrap();
        let l = dirichlet_lvalue(d, 3.0, 64).unwrap();
        let primes = PrimeTable::new(100_000);
        let mut prod = 1.0f64;
        for &p in primes.primes() {
            prod /= 1.0 - d.chi(p as i64) as f64 * (p as f64).powi(-3);
        }
        assert!((l.to_f64() - prod).abs() < l.tail_bound + 1e-10);
    }

    #[test]
    fn catalan_stable() {
        let d = FundamentalDiscriminant::new(-4).unwrap();
        let l = dirichlet_lvalue(d, 2.0, 40).unwrap();
        let catalan = 0.915_965_594_177_219_015_054_603_514_932_384_110_774;
        assert!((l.to_f64() - catalan).abs() <= l.tail_bound);
    }

    #[test]
    fn delta_twists() {
        let f = &hecke_eigenforms(12, 3000, 128).unwrap()[0];
        let one = FundamentalDiscriminant::new(1).unwrap();
        let tw = TwistedLValues::new(f, 60, 128).unwrap();
        let l = tw.value(one).unwrap();
        assert!(l.to_f64() > 0.0 && !l.degraded);
        let l2 = tw.value_at(one, 2 * l.truncation).unwrap();
        let diff = Float::with_val(128, &l.value - &l2.value).to_f64().abs();
        assert!(diff < 1e-20 && diff <= l.tail_bound + l2.tail_bound);
        // odd character, even k: root number −1
        let m3 = FundamentalDiscriminant::new(-3).unwrap();
        assert_eq!(tw.value(m3).unwrap().value, 0);
        assert!(tw.value_at(one, tw.limit() + 1).is_err());
    }

    #[test]
    fn f64_path_matches_float_path() {
        let f = &hecke_eigenforms(12, 3000, 128).unwrap()[0];
        let d = FundamentalDiscriminant::new(13).unwrap();
        let hi = central_lvalue(f, d, 128).unwrap();
        let lo = central_lvalue(f, d, 40).unwrap();
        assert!((hi.to_f64() - lo.to_f64()).abs() < lo.tail_bound + 1e-12);
    }

    #[test]
    fn afe_self_consistency_random() {
        let forms = [
            hecke_eigenforms(12, 30_000, 64).unwrap(),
            hecke_eigenforms(16, 30_000, 64).unwrap(),
        ];
        let ds = enumerate_discriminants(0, 2000, Sign::Positive, ResidueFilter::All).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..12 {
            let f = &forms[rng.gen_range(0..2)][0];
            let d = ds[rng.gen_range(0..ds.len())];
            let tw = TwistedLValues::new(f, d.abs(), 64).unwrap();
            let t = afe_truncation(f.k(), d.abs(), 64);
            let a = tw.value_at(d, t).unwrap();
            let tw2 = TwistedLValues::with_limit(f, 2 * t as usize, 64).unwrap();
            let b = tw2.value_at(d, 2 * t).unwrap();
            let diff = Float::with_val(64, &a.value - &b.value).to_f64().abs();
            assert!(diff <= a.tail_bound + b.tail_bound + 1e-15, "D = {d}");
        }
    }

    #[test]
    fn table_exhaustion_names_prime() {
        let f = &hecke_eigenforms(12, 100, 64).unwrap()[0];
        let d = FundamentalDiscriminant::new(101).unwrap();
        match central_lvalue(f, d, 64) {
            Err(Error::TableExhausted { needed, available }) => {
                assert!(needed > 100 && available == 100)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rankin_diagonal() {
        let f = &hecke_eigenforms(12, 1000, 64).unwrap()[0];
        assert_eq!(rankin_sum(f, f, 1.5).unwrap(), 0.0);
        let s = rankin_sum(f, f, 1000.0).unwrap();
        assert!(s > 0.0 && s / 1000.0 < 2.0);
        assert!(rankin_sum(f, f, 1010.0).is_err());
    }

    #[test]
    fn csv_rows() {
        let d = FundamentalDiscriminant::new(-3).unwrap();
        let l = LValue::exact_zero(64);
        let csv = lvalue_csv([(d, &l)]);
        assert!(csv.starts_with("D,parity,L,tail_bound,T\n-3,odd,0,0e0,0\n"), "{csv}");
    }
}
