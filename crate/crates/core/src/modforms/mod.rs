//! Level-one modular forms of integral weight: Eisenstein series, the
//! Victor Miller basis, Hecke eigenforms and their coefficients.

pub mod eigen;

use std::sync::Arc;

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::arith::{factorize, sigma_table, FactorTable, PrimeTable};
use crate::error::{Error, Result};
use crate::qseries::{echelonize, ExactSeries};

/// Default mantissa precision for numeric eigen-data.
pub const DEFAULT_BITS: u32 = 128;

/// `E₄ = 1 + 240 Σ σ₃(n)qⁿ` or `E₆ = 1 − 504 Σ σ₅(n)qⁿ`.
pub fn eisenstein(weight: u32, prec: usize) -> Result<ExactSeries> {
    let (power, scale) = match weight {
        4 => (3, 240),
        6 => (5, -504),
        _ => {
            return Err(Error::domain(format!(
                "Eisenstein series only for weight 4 or 6, got {weight}"
            )))
        }
    };
    if prec == 0 {
        return Err(Error::domain("prec must be at least 1"));
    }
    let sigma = sigma_table(prec.saturating_sub(1), power);
    let mut coeffs: Vec<Integer> = sigma.into_iter().map(|s| s * scale).collect();
    coeffs[0] = Integer::from(1);
    Ok(ExactSeries::from_integers(prec, coeffs))
}

/// `η(q)³/q^{1/8} = Σ_{n≥0} (−1)ⁿ(2n+1) q^{n(n+1)/2}` (Jacobi), sparse.
pub fn eta_cubed(prec: usize) -> ExactSeries {
    let mut terms = Vec::new();
    let mut n: usize = 0;
    while n * (n + 1) / 2 < prec {
        let c = Integer::from(2 * n + 1);
        terms.push((n * (n + 1) / 2, if n.is_multiple_of(2) { c } else { -c }));
        n += 1;
    }
    ExactSeries::from_terms(prec, terms)
}

/// `Δ = q ∏(1−qⁿ)²⁴ = q·(η³/q^{1/8})⁸`.
pub fn delta(prec: usize) -> ExactSeries {
    if prec <= 1 {
        return ExactSeries::zero(prec);
    }
    let e = eta_cubed(prec - 1);
    e.square().square().square().shift(1)
}

/// `dim S_w(SL₂(ℤ))`.
pub fn dim_cusp_forms(weight: u32) -> usize {
    if weight % 2 == 1 || weight < 12 {
        return 0;
    }
    let base = (weight / 12) as usize;
    if weight % 12 == 2 {
        base - 1
    } else {
        base
    }
}

fn check_weight(weight: u32) -> Result<()> {
    if weight < 12 || weight % 2 == 1 {
        return Err(Error::domain(format!(
            "weight must be even and at least 12, got {weight}"
        )));
    }
    Ok(())
}

/// Echelon basis `b₁, …, b_r` of `S_w` with `b_i(q^j) = δ_ij` for
/// `1 ≤ i, j ≤ r`, built from `Δʲ E₄ᵃ E₆ᵇ` with `12j + 4a + 6b = w`.
pub fn victor_miller_basis(weight: u32, prec: usize) -> Result<Vec<ExactSeries>> {
    check_weight(weight)?;
    let r = dim_cusp_forms(weight);
    if prec < r + 1 {
        return Err(Error::domain(format!(
            "prec {prec} too small for the weight-{weight} basis (need at least {})",
            r + 1
        )));
    }
    let e4 = eisenstein(4, prec)?;
    let e6 = eisenstein(6, prec)?;
    let d = delta(prec);
    let monomials: Vec<ExactSeries> = (1..=r)
        .map(|j| {
            let rest = weight - 12 * j as u32;
            let b = u32::from(rest % 4 == 2);
            let a = (rest - 6 * b) / 4;
            let mut f = d.pow(j as u32);
            if a > 0 {
                f = f.mul(&e4.pow(a));
            }
            if b > 0 {
                f = f.mul(&e6);
            }
            f
        })
        .collect();
    let ech = echelonize(&monomials);
    let expected: Vec<usize> = (1..=r).collect();
    if ech.pivots != expected {
        return Err(Error::ConstructionInvalid(format!(
            "weight-{weight} basis has pivots {:?}, expected {:?}",
            ech.pivots, expected
        )));
    }
    Ok(ech.rows)
}

/// Prime coefficients of one eigenform.
#[derive(Clone, Debug)]
pub enum PrimeCoeffs {
    /// Exact integers (one-dimensional cusp space).
    Exact(Vec<Integer>),
    /// Real approximations at the stated mantissa precision.
    Numeric { bits: u32, values: Vec<Float> },
}

/// A coefficient value: exact or numeric.
#[derive(Clone, Debug, PartialEq)]
pub enum CoeffValue {
    Exact(Integer),
    Numeric(Float),
}

impl CoeffValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            CoeffValue::Exact(x) => x.to_f64(),
            CoeffValue::Numeric(x) => x.to_f64(),
        }
    }

    pub fn to_float(&self, prec: u32) -> Float {
        match self {
            CoeffValue::Exact(x) => Float::with_val(prec, x),
            CoeffValue::Numeric(x) => Float::with_val(prec, x),
        }
    }

    pub fn as_exact(&self) -> Option<&Integer> {
        match self {
            CoeffValue::Exact(x) => Some(x),
            CoeffValue::Numeric(_) => None,
        }
    }
}

/// Normalized Hecke eigenform of level one and weight `2k`, stored through
/// its prime coefficients `a(p)`, `p ≤ prec_primes`.
#[derive(Clone, Debug)]
pub struct Eigenform {
    weight: u32,
    label: usize,
    primes: Arc<Vec<u64>>,
    coeffs: PrimeCoeffs,
    prec_primes: u64,
    /// Coordinates in the Victor Miller basis (numeric case).
    basis_coords: Option<Vec<Float>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenformSummary {
    pub weight: u32,
    pub label: usize,
    pub prec_primes: u64,
    pub exact: bool,
    pub a2: String,
}

impl Eigenform {
    /// Assemble from a prime table, checking the Deligne bound.
    pub fn from_prime_coeffs(
        weight: u32,
        label: usize,
        primes: Arc<Vec<u64>>,
        coeffs: PrimeCoeffs,
        prec_primes: u64,
    ) -> Result<Self> {
        check_weight(weight)?;
        let len = match &coeffs {
            PrimeCoeffs::Exact(v) => v.len(),
            PrimeCoeffs::Numeric { values, .. } => values.len(),
        };
        if len != primes.len() {
            return Err(Error::domain(format!(
                "{} coefficients for {} primes",
                len,
                primes.len()
            )));
        }
        let f = Eigenform {
            weight,
            label,
            primes,
            coeffs,
            prec_primes,
            basis_coords: None,
        };
        if let Some(p) = f.deligne_violation() {
            return Err(Error::ConstructionInvalid(format!(
                "a({p}) violates the Deligne bound for weight {weight}"
            )));
        }
        Ok(f)
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    /// `k` with weight `2k`.
    pub fn k(&self) -> u32 {
        self.weight / 2
    }

    /// 1-based position in the `a(2)`-ascending ordering.
    pub fn label(&self) -> usize {
        self.label
    }

    pub fn prec_primes(&self) -> u64 {
        self.prec_primes
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.coeffs, PrimeCoeffs::Exact(_))
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn prime_coeffs(&self) -> &PrimeCoeffs {
        &self.coeffs
    }

    pub fn basis_coords(&self) -> Option<&[Float]> {
        self.basis_coords.as_deref()
    }

    /// Working precision of the stored values (`None` when exact).
    pub fn bits(&self) -> Option<u32> {
        match &self.coeffs {
            PrimeCoeffs::Exact(_) => None,
            PrimeCoeffs::Numeric { bits, .. } => Some(*bits),
        }
    }

    fn prime_index(&self, p: u64) -> Result<usize> {
        if p > self.prec_primes {
            return Err(Error::TableExhausted {
                needed: p,
                available: self.prec_primes,
            });
        }
        self.primes
            .binary_search(&p)
            .map_err(|_| Error::domain(format!("{p} is not prime")))
    }

    /// `a(p)` for a prime `p ≤ prec_primes`.
    pub fn prime_coeff(&self, p: u64) -> Result<CoeffValue> {
        let i = self.prime_index(p)?;
        Ok(match &self.coeffs {
            PrimeCoeffs::Exact(v) => CoeffValue::Exact(v[i].clone()),
            PrimeCoeffs::Numeric { values, .. } => CoeffValue::Numeric(values[i].clone()),
        })
    }

    pub fn prime_coeff_f64(&self, p: u64) -> Result<f64> {
        let i = self.prime_index(p)?;
        Ok(match &self.coeffs {
            PrimeCoeffs::Exact(v) => v[i].to_f64(),
            PrimeCoeffs::Numeric { values, .. } => values[i].to_f64(),
        })
    }

    /// `λ(p) = a(p)/p^{k−1/2}` in double precision.
    pub fn normalized_prime_coeff(&self, p: u64) -> Result<f64> {
        Ok(self.prime_coeff_f64(p)? / (p as f64).powf(self.k() as f64 - 0.5))
    }

    fn deligne_violation(&self) -> Option<u64> {
        let e = self.k() as f64 - 0.5;
        self.primes.iter().enumerate().find_map(|(i, &p)| {
            let a = match &self.coeffs {
                PrimeCoeffs::Exact(v) => v[i].to_f64(),
                PrimeCoeffs::Numeric { values, .. } => values[i].to_f64(),
            };
            (a.abs() > 2.0 * (p as f64).powf(e) * (1.0 + 1e-12)).then_some(p)
        })
    }

    /// `a(n)` from the prime coefficients by multiplicativity and
    /// `a(p^{j+1}) = a(p)a(p^j) − p^{2k−1}a(p^{j−1})`.
    pub fn coeff_at(&self, n: u64) -> Result<CoeffValue> {
        if n == 0 {
            return Err(Error::domain("coefficients are indexed from n = 1"));
        }
        let w1 = self.weight - 1;
        match &self.coeffs {
            PrimeCoeffs::Exact(_) => {
                let mut acc = Integer::from(1);
                for (p, e) in factorize(n) {
                    let ap = match self.prime_coeff(p)? {
                        CoeffValue::Exact(x) => x,
                        CoeffValue::Numeric(_) => unreachable!(),
                    };
                    let pw = Integer::from(p).pow(w1);
                    let (mut prev, mut cur) = (Integer::from(1), ap.clone());
                    for _ in 1..e {
                        let next = Integer::from(&ap * &cur) - Integer::from(&pw * &prev);
                        prev = cur;
                        cur = next;
                    }
                    acc *= cur;
                }
                Ok(CoeffValue::Exact(acc))
            }
            PrimeCoeffs::Numeric { bits, .. } => {
                let prec = *bits;
                let mut acc = Float::with_val(prec, 1);
                for (p, e) in factorize(n) {
                    let ap = self.prime_coeff(p)?.to_float(prec);
                    let pw = Float::with_val(prec, Integer::from(p).pow(w1));
                    let (mut prev, mut cur) = (Float::with_val(prec, 1), ap.clone());
                    for _ in 1..e {
                        let next = Float::with_val(prec, &ap * &cur) - Float::with_val(prec, &pw * &prev);
                        prev = cur;
                        cur = next;
                    }
                    acc *= cur;
                }
                Ok(CoeffValue::Numeric(acc))
            }
        }
    }

    /// Table of `λ(n) = a(n)/n^{k−1/2}` for `1 ≤ n ≤ limit`; with `bits`
    /// also at that mantissa precision.
    pub fn normalized_table(&self, limit: usize, bits: Option<u32>) -> Result<NormalizedCoeffTable> {
        NormalizedCoeffTable::build(self, limit, bits)
    }

    pub fn summary(&self) -> EigenformSummary {
        let a2 = match self.prime_coeff(2) {
            Ok(CoeffValue::Exact(x)) => x.to_string(),
            Ok(CoeffValue::Numeric(x)) => format_float(&x),
            Err(_) => String::new(),
        };
        EigenformSummary {
            weight: self.weight,
            label: self.label,
            prec_primes: self.prec_primes,
            exact: self.is_exact(),
            a2,
        }
    }
}

/// Decimal rendering of a float with as many digits as its precision
/// supports.
pub fn format_float(x: &Float) -> String {
    let digits = (x.prec() as f64 * std::f64::consts::LOG10_2).ceil() as usize;
    x.to_string_radix(10, Some(digits.max(1)))
}

/// The full eigen-decomposition of `S_w` under `T(2)`.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub weight: u32,
    pub basis: Vec<ExactSeries>,
    /// Matrix of `T(2)`: `T(2) bᵢ = Σⱼ m[i][j] bⱼ`.
    pub t2: Vec<Vec<Rational>>,
    /// `det(x − T(2))`, lowest degree first.
    pub charpoly: Vec<Rational>,
    pub forms: Vec<Eigenform>,
}

/// Matrix of `T(p)` on the echelon basis: row `i` holds the coefficients
/// of `q¹..q^r` in `T(p) bᵢ`.
pub fn hecke_matrix(basis: &[ExactSeries], weight: u32, p: usize) -> Result<Vec<Vec<Rational>>> {
    let r = basis.len();
    let need = p * r + 1;
    if basis.iter().any(|b| b.prec() < need) {
        return Err(Error::domain(format!(
            "T({p}) matrix needs precision {need}"
        )));
    }
    let pw = Rational::from(Integer::from(p).pow(weight - 1));
    Ok(basis
        .iter()
        .map(|b| {
            (1..=r)
                .map(|j| {
                    let mut x = b.coeff(p * j);
                    if j % p == 0 {
                        x += (&pw * b.coeff(j / p));
                    }
                    x
                })
                .collect()
        })
        .collect())
}

/// Eigenforms of weight `w` with `a(p)` for all `p ≤ prec_primes`, ordered by
/// `a(2)` ascending. Numeric eigen-data uses `bits` of mantissa.
pub fn hecke_eigenforms(weight: u32, prec_primes: u64, bits: u32) -> Result<Vec<Eigenform>> {
    Ok(hecke_eigensystem(weight, prec_primes, bits)?.forms)
}

pub fn hecke_eigensystem(weight: u32, prec_primes: u64, bits: u32) -> Result<EigenSystem> {
    check_weight(weight)?;
    let r = dim_cusp_forms(weight);
    let prec_primes = prec_primes.max(2);
    let prec = (prec_primes as usize + 1).max(2 * r + 1);
    let basis = victor_miller_basis(weight, prec)?;
    let t2 = hecke_matrix(&basis, weight, 2)?;
    let cp = eigen::charpoly(&t2);
    let primes = Arc::new(PrimeTable::new(prec_primes).primes().to_vec());

    let forms = if r == 1 {
        let b = &basis[0];
        let values = primes
            .iter()
            .map(|&p| {
                b.integer_coeff(p as usize)
                    .ok_or_else(|| Error::ConstructionInvalid(format!("a({p}) is not integral")))
            })
            .collect::<Result<Vec<_>>>()?;
        vec![Eigenform::from_prime_coeffs(
            weight,
            1,
            primes,
            PrimeCoeffs::Exact(values),
            prec_primes,
        )?]
    } else {
        let work = bits + 64;
        let roots = eigen::real_roots(&cp, work)?;
        if roots.len() != r {
            return Err(Error::ConstructionInvalid(format!(
                "T(2) has {} real eigenvalues on a {r}-dimensional space",
                roots.len()
            )));
        }
        roots
            .iter()
            .enumerate()
            .map(|(idx, lam)| {
                let v = eigen::left_eigenvector(&t2, lam, work)?;
                let values: Vec<Float> = primes
                    .par_iter()
                    .map(|&p| {
                        let mut acc = Float::with_val(work, 0);
                        for (vi, b) in v.iter().zip(&basis) {
                            acc += Float::with_val(work, vi * &b.coeff(p as usize));
                        }
                        Float::with_val(bits, &acc)
                    })
                    .collect();
                let mut f = Eigenform::from_prime_coeffs(
                    weight,
                    idx + 1,
                    primes.clone(),
                    PrimeCoeffs::Numeric { bits, values },
                    prec_primes,
                )?;
                f.basis_coords = Some(v);
                Ok(f)
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(EigenSystem {
        weight,
        basis,
        t2,
        charpoly: cp,
        forms,
    })
}

/// `λ(n) = a(n)/n^{k−1/2}`, Deligne-normalized so that `|λ(n)| ≤ d(n)`.
#[derive(Clone, Debug)]
pub struct NormalizedCoeffTable {
    weight: u32,
    limit: usize,
    values: Vec<f64>,
    precise: Option<(u32, Vec<Float>)>,
}

impl NormalizedCoeffTable {
    fn build(f: &Eigenform, limit: usize, bits: Option<u32>) -> Result<Self> {
        if limit as u64 > f.prec_primes && limit > 1 {
            let largest = PrimeTable::new(limit as u64).primes().last().copied().unwrap_or(1);
            if largest > f.prec_primes {
                return Err(Error::TableExhausted {
                    needed: largest,
                    available: f.prec_primes,
                });
            }
        }
        let spf = FactorTable::new(limit.max(1));
        let e = f.k() as f64 - 0.5;
        let mut values = vec![0.0f64; limit + 1];
        if limit >= 1 {
            values[1] = 1.0;
        }
        for n in 2..=limit {
            let p = spf.smallest_prime_factor(n) as usize;
            let m = n / p;
            values[n] = if !m.is_multiple_of(p) {
                if m == 1 {
                    f.prime_coeff_f64(p as u64)? / (p as f64).powf(e)
                } else {
                    values[p] * values[m]
                }
            } else {
                // n = p^j · rest with j ≥ 2
                let mut pj = p;
                while (n / pj).is_multiple_of(p) {
                    pj *= p;
                }
                let rest = n / pj;
                if rest == 1 {
                    values[p] * values[pj / p] - values[pj / (p * p)]
                } else {
                    values[pj] * values[rest]
                }
            };
        }
        let precise = match bits {
            None => None,
            Some(b) => {
                let wp = b + 16;
                let mut v: Vec<Float> = vec![Float::with_val(wp, 0); limit + 1];
                if limit >= 1 {
                    v[1] = Float::with_val(wp, 1);
                }
                let half = Float::with_val(wp, e);
                for n in 2..=limit {
                    let p = spf.smallest_prime_factor(n) as usize;
                    let m = n / p;
                    let val = if !m.is_multiple_of(p) {
                        if m == 1 {
                            let a = f.prime_coeff(p as u64)?.to_float(wp);
                            let pe = Float::with_val(wp, p).pow(&half);
                            a / pe
                        } else {
                            Float::with_val(wp, &v[p] * &v[m])
                        }
                    } else {
                        let mut pj = p;
                        while (n / pj).is_multiple_of(p) {
                            pj *= p;
                        }
                        let rest = n / pj;
                        if rest == 1 {
                            Float::with_val(wp, &v[p] * &v[pj / p]) - &v[pj / (p * p)]
                        } else {
                            Float::with_val(wp, &v[pj] * &v[rest])
                        }
                    };
                    v[n] = val;
                }
                Some((wp, v))
            }
        };
        Ok(NormalizedCoeffTable {
            weight: f.weight,
            limit,
            values,
            precise,
        })
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    /// `λ(n)` in double precision, `n ≤ limit`.
    pub fn get(&self, n: usize) -> f64 {
        self.values[n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// High-precision values, if built with `bits`.
    pub fn precise(&self) -> Option<(u32, &[Float])> {
        self.precise.as_ref().map(|(b, v)| (*b, v.as_slice()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::divisor_count;

    fn int(s: &ExactSeries, n: usize) -> Integer {
        s.integer_coeff(n).unwrap()
    }

    #[test]
    fn eisenstein_coefficients() {
        let e4 = eisenstein(4, 10).unwrap();
        assert_eq!(int(&e4, 0), 1);
        assert_eq!(int(&e4, 1), 240);
        let e6 = eisenstein(6, 10).unwrap();
        assert_eq!(int(&e6, 2), -16632);
        assert!(eisenstein(8, 10).is_err());
    }

    #[test]
    fn delta_matches_eisenstein_combination_and_pentagonal_product() {
        let prec = 400;
        let e4 = eisenstein(4, prec).unwrap();
        let e6 = eisenstein(6, prec).unwrap();
        let via_e = e4.pow(3).sub(&e6.square()).scale(&Rational::from((1, 1728)));
        let d = delta(prec);
        assert_eq!(d, via_e);
        // Euler's pentagonal series, cubed then to the 8th power
        let mut pent = vec![];
        for k in -30i64..=30 {
            let e = k * (3 * k - 1) / 2;
            if (e as usize) < prec {
                pent.push((e as usize, Integer::from(if k % 2 == 0 { 1 } else { -1 })));
            }
        }
        let eta = ExactSeries::from_terms(prec - 1, pent);
        assert_eq!(eta.pow(24).shift(1), d);
        assert_eq!(int(&d, 2), -24);
        assert_eq!(int(&d, 6), -6048);
    }

    #[test]
    fn dimension_formula() {
        let dims: Vec<usize> = (0..=40).step_by(2).map(dim_cusp_forms).collect();
        assert_eq!(
            dims,
            vec![0, 0, 0, 0, 0, 0, 1, 0, 1, 1, 1, 1, 2, 1, 2, 2, 2, 2, 3, 2, 3]
        );
        assert_eq!(dim_cusp_forms(13), 0);
    }

    #[test]
    fn victor_miller_identity_block() {
        for w in [12u32, 16, 24, 26, 36, 48] {
            let r = dim_cusp_forms(w);
            let b = victor_miller_basis(w, 30).unwrap();
            assert_eq!(b.len(), r);
            for (i, bi) in b.iter().enumerate() {
                assert_eq!(int(bi, 0), 0);
                for j in 1..=r {
                    assert_eq!(int(bi, j), Integer::from((i + 1 == j) as u32));
                }
                assert!(bi.is_integral(), "weight {w} basis not integral");
            }
        }
        assert!(victor_miller_basis(24, 2).is_err());
        assert!(victor_miller_basis(14, 10).unwrap().is_empty());
        assert!(victor_miller_basis(13, 10).is_err());
    }

    #[test]
    fn weight_twelve_eigenform() {
        let fs = hecke_eigenforms(12, 200, DEFAULT_BITS).unwrap();
        assert_eq!(fs.len(), 1);
        let f = &fs[0];
        assert_eq!(f.coeff_at(1).unwrap(), CoeffValue::Exact(Integer::from(1)));
        assert_eq!(f.prime_coeff(2).unwrap(), CoeffValue::Exact(Integer::from(-24)));
        assert_eq!(f.coeff_at(4).unwrap(), CoeffValue::Exact(Integer::from(-1472)));
        assert_eq!(f.coeff_at(6).unwrap(), CoeffValue::Exact(Integer::from(-6048)));
        assert!(matches!(f.coeff_at(211), Err(Error::TableExhausted { .. })));
    }

    #[test]
    fn hecke_recursion_matches_expansion_exact() {
        for w in [12u32, 16, 18, 20, 22, 26] {
            let prec = 2600;
            let f = &hecke_eigenforms(w, prec as u64 - 1, DEFAULT_BITS).unwrap()[0];
            let series = &victor_miller_basis(w, prec).unwrap()[0];
            let primes = PrimeTable::new(50);
            for &p in primes.primes() {
                for &q in primes.primes() {
                    let n = (p * q) as usize;
                    assert_eq!(
                        f.coeff_at(n as u64).unwrap(),
                        CoeffValue::Exact(int(series, n)),
                        "weight {w}, n = {n}"
                    );
                }
            }
        }
    }

    #[test]
    fn weight_24_eigenvalues_and_recursion() {
        let sys = hecke_eigensystem(24, 3000, DEFAULT_BITS).unwrap();
        assert_eq!(sys.forms.len(), 2);
        // x² − 1080x − 20468736 = (x − 540)² − 144·144169
        assert_eq!(
            sys.charpoly,
            vec![Rational::from(-20468736), Rational::from(-1080), Rational::from(1)]
        );
        let s = Float::with_val(200, 144169).sqrt() * 12u32;
        let want = [Float::with_val(200, 540) - &s, Float::with_val(200, 540) + &s];
        for (f, w) in sys.forms.iter().zip(&want) {
            let a2 = f.prime_coeff(2).unwrap().to_float(200);
            assert!(Float::with_val(200, &a2 - w).abs() < 1e-30);
        }
        // expansion Σ vᵢ bᵢ against Hecke recursion for n = pq, p, q ≤ 50
        let primes = PrimeTable::new(50);
        for f in &sys.forms {
            let v = f.basis_coords().unwrap();
            for &p in primes.primes() {
                for &q in primes.primes() {
                    let n = (p * q) as usize;
                    let mut direct = Float::with_val(200, 0);
                    for (vi, b) in v.iter().zip(&sys.basis) {
                        direct += Float::with_val(200, vi * &b.coeff(n));
                    }
                    let rec = f.coeff_at(n as u64).unwrap().to_float(200);
                    let scale = Float::with_val(200, direct.clone().abs()).max(&Float::with_val(200, 1));
                    let rel = Float::with_val(200, &direct - &rec).abs() / scale;
                    assert!(rel < 1e-30, "n={n} rel={rel}");
                }
            }
        }
    }

    #[test]
    fn deligne_bound_and_count_over_weights() {
        for w in (12..=40).step_by(2) {
            let fs = hecke_eigenforms(w, 400, DEFAULT_BITS).unwrap();
            assert_eq!(fs.len(), dim_cusp_forms(w));
            for f in &fs {
                assert!(f.deligne_violation().is_none());
            }
            let a2: Vec<f64> = fs.iter().map(|f| f.prime_coeff_f64(2).unwrap()).collect();
            assert!(a2.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn normalized_table_respects_divisor_bound() {
        for f in hecke_eigenforms(24, 5000, DEFAULT_BITS).unwrap() {
            let t = f.normalized_table(5000, Some(96)).unwrap();
            let (_, precise) = t.precise().unwrap();
            for n in 1..=5000usize {
                assert!(t.get(n).abs() <= divisor_count(n as u64) as f64 + 1e-9);
                assert!((precise[n].to_f64() - t.get(n)).abs() < 1e-9);
            }
            let a = f.coeff_at(360).unwrap().to_f64();
            assert!((t.get(360) - a / 360f64.powf(11.5)).abs() < 1e-9);
        }
        let f = &hecke_eigenforms(12, 100, DEFAULT_BITS).unwrap()[0];
        assert!(matches!(f.normalized_table(1000, None), Err(Error::TableExhausted { .. })));
    }
}
