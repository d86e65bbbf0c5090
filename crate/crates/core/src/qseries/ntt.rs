//! Multi-modulus number-theoretic transform convolution of integer vectors.
//!
//! Coefficients are reduced modulo up to twenty primes `p = c·2³² + 1 < 2⁶²`,
//! convolved with a radix-2 transform in Montgomery form, and lifted back by
//! Garner's algorithm. The prime count is chosen from a bound on the output
//! coefficients, so the lift is exact.

use rayon::prelude::*;
use rug::{Assign, Integer};

/// `(p, generator of (Z/p)^*)`, all with `2³² | p − 1`.
const PRIMES: [(u64, u64); 20] = [
    (4611685941117976577, 3),
    (4611685692009873409, 19),
    (4611685606110527489, 3),
    (4611685318347718657, 5),
    (4611685232448372737, 3),
    (4611685219563470849, 3),
    (4611685125074190337, 5),
    (4611685090714451969, 3),
    (4611685039174844417, 3),
    (4611685021994975233, 5),
    (4611684738527133697, 7),
    (4611684691282493441, 3),
    (4611684674102624257, 5),
    (4611684609678114817, 5),
    (4611684588203278337, 3),
    (4611684274670665729, 7),
    (4611684098577006593, 3),
    (4611683789339361281, 3),
    (4611683647605440513, 3),
    (4611683643310473217, 7),
];

/// Every prime exceeds `2^BITS_PER_PRIME`.
const BITS_PER_PRIME: u32 = 61;

pub(crate) const MAX_PRIMES: usize = PRIMES.len();

#[derive(Clone, Copy, Debug)]
struct Modulus {
    p: u64,
    /// `−p⁻¹ mod 2⁶⁴`
    pinv: u64,
    /// `2¹²⁸ mod p`
    r2: u64,
    g: u64,
}

impl Modulus {
    fn new(p: u64, g: u64) -> Self {
        let mut inv: u64 = p;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(p.wrapping_mul(inv)));
        }
        debug_assert_eq!(p.wrapping_mul(inv), 1);
        let r = ((1u128 << 64) % p as u128) as u64;
        let r2 = ((r as u128 * r as u128) % p as u128) as u64;
        Modulus {
            p,
            pinv: inv.wrapping_neg(),
            r2,
            g,
        }
    }

    #[inline(always)]
    fn redc(&self, t: u128) -> u64 {
        let m = (t as u64).wrapping_mul(self.pinv);
        let u = ((t + m as u128 * self.p as u128) >> 64) as u64;
        if u >= self.p {
            u - self.p
        } else {
            u
        }
    }

    #[inline(always)]
    fn mul(&self, a: u64, b: u64) -> u64 {
        self.redc(a as u128 * b as u128)
    }

    #[inline(always)]
    fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline(always)]
    fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    fn to_mont(&self, x: u64) -> u64 {
        self.redc(x as u128 * self.r2 as u128)
    }

    fn from_mont(&self, x: u64) -> u64 {
        self.redc(x as u128)
    }

    /// `base^e` with `base` and result in Montgomery form.
    fn pow(&self, base: u64, mut e: u64) -> u64 {
        let mut acc = self.to_mont(1);
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        acc
    }

    /// Montgomery form of a primitive `n`-th root of unity (`n` a power of 2).
    fn root_of_unity(&self, n: usize) -> u64 {
        self.pow(self.to_mont(self.g), (self.p - 1) / n as u64)
    }

    /// `x mod p` for a multi-precision integer, in plain (non-Montgomery) form.
    fn reduce(&self, x: &Integer) -> u64 {
        let mut r: u64 = 0;
        for &limb in x.as_limbs().iter().rev() {
            r = ((((r as u128) << 64) | limb as u128) % self.p as u128) as u64;
        }
        if x.is_negative() && r != 0 {
            self.p - r
        } else {
            r
        }
    }

    /// Decimation-in-frequency transform; output in bit-reversed order.
    fn forward(&self, a: &mut [u64]) {
        let n = a.len();
        let mut tw = Vec::with_capacity(n / 2);
        let mut len = n / 2;
        while len >= 1 {
            let w_len = self.root_of_unity(2 * len);
            tw.clear();
            let mut w = self.to_mont(1);
            for _ in 0..len {
                tw.push(w);
                w = self.mul(w, w_len);
            }
            for chunk in a.chunks_exact_mut(2 * len) {
                let (lo, hi) = chunk.split_at_mut(len);
                for j in 0..len {
                    let u = lo[j];
                    let v = hi[j];
                    lo[j] = self.add(u, v);
                    hi[j] = self.mul(self.sub(u, v), tw[j]);
                }
            }
            len /= 2;
        }
    }

    /// Decimation-in-time inverse transform from bit-reversed input, scaled
    /// by `1/n`.
    fn inverse(&self, a: &mut [u64]) {
        let n = a.len();
        let mut tw = Vec::with_capacity(n / 2);
        let mut len = 1;
        while len < n {
            let w_len = self.root_of_unity(2 * len);
            let w_len_inv = self.pow(w_len, self.p - 2);
            tw.clear();
            let mut w = self.to_mont(1);
            for _ in 0..len {
                tw.push(w);
                w = self.mul(w, w_len_inv);
            }
            for chunk in a.chunks_exact_mut(2 * len) {
                let (lo, hi) = chunk.split_at_mut(len);
                for j in 0..len {
                    let u = lo[j];
                    let v = self.mul(hi[j], tw[j]);
                    lo[j] = self.add(u, v);
                    hi[j] = self.sub(u, v);
                }
            }
            len *= 2;
        }
        let n_inv = self.pow(self.to_mont(n as u64), self.p - 2);
        for x in a.iter_mut() {
            *x = self.mul(*x, n_inv);
        }
    }

    /// Cyclic convolution of the residues of `a` and `b` modulo `p`, first
    /// `out_len` entries in plain form.
    fn convolve(&self, a: &[Integer], b: &[Integer], n: usize, out_len: usize) -> Vec<u64> {
        let mut fa = vec![0u64; n];
        for (dst, x) in fa.iter_mut().zip(a) {
            *dst = self.to_mont(self.reduce(x));
        }
        self.forward(&mut fa);
        let mut fb = vec![0u64; n];
        for (dst, x) in fb.iter_mut().zip(b) {
            *dst = self.to_mont(self.reduce(x));
        }
        self.forward(&mut fb);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x = self.mul(*x, *y);
        }
        drop(fb);
        self.inverse(&mut fa);
        fa.truncate(out_len);
        for x in fa.iter_mut() {
            *x = self.from_mont(*x);
        }
        fa
    }
}

fn max_bits(v: &[Integer]) -> u32 {
    v.iter().map(|x| x.significant_bits()).max().unwrap_or(0)
}

/// Number of primes whose product exceeds twice the largest possible
/// `|c_i|`, or `None` if more than the available primes are needed.
pub(crate) fn primes_needed(a: &[Integer], b: &[Integer]) -> Option<usize> {
    let terms = a.len().min(b.len()) as u64;
    let bound_bits = max_bits(a) + max_bits(b) + (64 - terms.leading_zeros());
    let count = (bound_bits + 2).div_ceil(BITS_PER_PRIME).max(1) as usize;
    (count <= MAX_PRIMES).then_some(count)
}

pub(crate) fn transform_len(la: usize, lb: usize) -> usize {
    (la + lb - 1).next_power_of_two()
}

/// First `out_len` coefficients of `a·b`, exactly.
///
/// When the coefficient bound exceeds the capacity of the prime set, the
/// operand with the larger entries is split as `hi·2^h + lo` and the pieces are
/// convolved separately.
pub(crate) fn convolve(a: &[Integer], b: &[Integer], out_len: usize) -> Vec<Integer> {
    if let Some(c) = convolve_rns(a, b, out_len) {
        return c;
    }
    let (a, b) = if max_bits(a) >= max_bits(b) { (a, b) } else { (b, a) };
    let h = max_bits(a) / 2;
    let mut lo = Vec::with_capacity(a.len());
    let mut hi = Vec::with_capacity(a.len());
    for x in a {
        let mag = Integer::from(x.abs_ref());
        let mut l = Integer::from(mag.keep_bits_ref(h));
        let mut u = mag >> h;
        if x.is_negative() {
            l = -l;
            u = -u;
        }
        lo.push(l);
        hi.push(u);
    }
    let mut out = convolve(&hi, b, out_len);
    let low = convolve(&lo, b, out_len);
    for (o, l) in out.iter_mut().zip(low) {
        *o <<= h;
        *o += l;
    }
    out
}

fn convolve_rns(a: &[Integer], b: &[Integer], out_len: usize) -> Option<Vec<Integer>> {
    let a = &a[..a.len().min(out_len)];
    let b = &b[..b.len().min(out_len)];
    if a.is_empty() || b.is_empty() {
        return Some(vec![Integer::new(); out_len]);
    }
    let m = primes_needed(a, b)?;
    let n = transform_len(a.len(), b.len());
    let moduli: Vec<Modulus> = PRIMES[..m].iter().map(|&(p, g)| Modulus::new(p, g)).collect();
    let residues: Vec<Vec<u64>> = moduli
        .par_iter()
        .map(|md| md.convolve(a, b, n, out_len))
        .collect();
    let valid = out_len.min(a.len() + b.len() - 1);
    let lift = Garner::new(&moduli);
    let mut out: Vec<Integer> = (0..valid)
        .into_par_iter()
        .map_init(
            || (vec![0u64; m], Integer::new()),
            |(digits, scratch), i| {
                let r: Vec<u64> = residues.iter().map(|res| res[i]).collect();
                lift.lift(&r, digits, scratch)
            },
        )
        .collect();
    out.resize(out_len, Integer::new());
    Some(out)
}

/// Mixed-radix reconstruction from residues.
struct Garner {
    moduli: Vec<Modulus>,
    /// `inv[i] = (p_0 ⋯ p_{i−1})⁻¹ mod p_i`, Montgomery form.
    inv: Vec<u64>,
    product: Integer,
    half: Integer,
}

impl Garner {
    fn new(moduli: &[Modulus]) -> Self {
        let mut inv = Vec::with_capacity(moduli.len());
        for (i, md) in moduli.iter().enumerate() {
            let mut prod = md.to_mont(1);
            for prev in &moduli[..i] {
                prod = md.mul(prod, md.to_mont(prev.p % md.p));
            }
            inv.push(md.pow(prod, md.p - 2));
        }
        let mut product = Integer::from(1);
        for md in moduli {
            product *= md.p;
        }
        let half = Integer::from(&product >> 1);
        Garner {
            moduli: moduli.to_vec(),
            inv,
            product,
            half,
        }
    }

    fn lift(&self, residues: &[u64], digits: &mut [u64], scratch: &mut Integer) -> Integer {
        let m = self.moduli.len();
        for i in 0..m {
            let md = &self.moduli[i];
            // x_i = (r_i − (d_0 + d_1 p_0 + … )) · inv_i  mod p_i
            let mut acc = md.to_mont(0);
            let mut radix = md.to_mont(1);
            for j in 0..i {
                let dj = md.to_mont(digits[j] % md.p);
                acc = md.add(acc, md.mul(dj, radix));
                radix = md.mul(radix, md.to_mont(self.moduli[j].p % md.p));
            }
            let diff = md.sub(md.to_mont(residues[i]), acc);
            digits[i] = md.from_mont(md.mul(diff, self.inv[i]));
        }
        scratch.assign(digits[m - 1]);
        for i in (0..m - 1).rev() {
            *scratch *= self.moduli[i].p;
            *scratch += digits[i];
        }
        if *scratch > self.half {
            Integer::from(&*scratch - &self.product)
        } else {
            scratch.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn is_prime(n: u64) -> bool {
        Integer::from(n).is_probably_prime(40) != rug::integer::IsPrime::No
    }

    #[test]
    fn prime_table_is_valid() {
        for &(p, g) in &PRIMES {
            assert!(is_prime(p));
            assert_eq!((p - 1) % (1u64 << 32), 0);
            assert!(p < (1 << 62) && p > (1 << 61));
            // g generates: g^((p-1)/q) != 1 for each prime q | p-1
            let p1 = Integer::from(p - 1);
            let mut m = p1.clone();
            let mut qs = vec![];
            let mut q = Integer::from(2);
            while Integer::from(&q * &q) <= m {
                if m.is_divisible(&q) {
                    qs.push(q.clone());
                    while m.is_divisible(&q) {
                        m /= &q;
                    }
                }
                q += 1;
            }
            if m > 1 {
                qs.push(m);
            }
            for q in qs {
                let e = Integer::from(&p1 / &q);
                let r = Integer::from(g).pow_mod(&e, &Integer::from(p)).unwrap();
                assert_ne!(r, 1, "g={g} not primitive mod {p}");
            }
        }
    }

    #[test]
    fn montgomery_roundtrip() {
        let md = Modulus::new(PRIMES[0].0, PRIMES[0].1);
        for x in [0u64, 1, 2, 12345, md.p - 1] {
            assert_eq!(md.from_mont(md.to_mont(x)), x);
        }
        let a = md.to_mont(123456789);
        let b = md.to_mont(987654321);
        let want = (123456789u128 * 987654321u128 % md.p as u128) as u64;
        assert_eq!(md.from_mont(md.mul(a, b)), want);
    }

    fn schoolbook(a: &[Integer], b: &[Integer], out_len: usize) -> Vec<Integer> {
        let mut out = vec![Integer::new(); out_len];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                if i + j < out_len {
                    out[i + j] += x * y;
                }
            }
        }
        out
    }

    #[test]
    fn convolve_matches_schoolbook() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(la, lb, bits) in &[(1, 1, 10), (5, 3, 64), (100, 77, 200), (300, 300, 700), (64, 1, 1)] {
            let gen = |rng: &mut ChaCha8Rng, len: usize| -> Vec<Integer> {
                (0..len)
                    .map(|_| {
                        let mut x = Integer::from(rng.gen::<u64>());
                        for _ in 0..bits / 64 {
                            x <<= 64;
                            x += rng.gen::<u64>();
                        }
                        x >>= 63 - (bits % 64).min(63);
                        if rng.gen_bool(0.5) {
                            -x
                        } else {
                            x
                        }
                    })
                    .collect()
            };
            let a = gen(&mut rng, la);
            let b = gen(&mut rng, lb);
            let full = la + lb - 1;
            for out_len in [1, full / 2 + 1, full, full + 5] {
                assert_eq!(convolve(&a, &b, out_len), schoolbook(&a, &b, out_len));
            }
        }
    }

    #[test]
    fn extreme_values_lift_with_correct_sign() {
        let big = Integer::from(Integer::from(1) << 500) - 1u32;
        let a: Vec<Integer> = vec![big.clone(), Integer::from(-1) * &big];
        let b = vec![big.clone(), big.clone()];
        assert_eq!(convolve(&a, &b, 3), schoolbook(&a, &b, 3));
    }

    #[test]
    fn oversized_entries_are_split() {
        let big = Integer::from(Integer::from(1) << 900) + 12345u32;
        let a: Vec<Integer> = vec![big.clone(), Integer::from(-3) * &big, Integer::from(7)];
        let b: Vec<Integer> = vec![-big.clone(), Integer::from(Integer::from(1) << 800)];
        assert!(convolve_rns(&a, &b, 4).is_none());
        assert_eq!(convolve(&a, &b, 4), schoolbook(&a, &b, 4));
    }
}
