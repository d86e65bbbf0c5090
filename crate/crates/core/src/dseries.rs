//! The Dirichlet series `D_g(s) = Σ α(n) n^{−s}` attached to a plus form,
//! evaluated three ways, together with the Γ-factor identities and the
//! `U₄`/`W₄` relation.

use num_complex::Complex64;
use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::arith::{
    enumerate_discriminants, jacobi, squarefree_decompose, FactorTable, FundamentalDiscriminant, Parity,
    ResidueFilter, Sign,
};
use crate::error::{Error, Result};
use crate::halfint::{Evaluation, PlusEigenbasis, PlusForm};
use crate::lfun::{dirichlet_lvalue, hecke_euler_product, hecke_lvalue_halfint, power_tail, real_gamma, zeta, LValue, LValueReport};

fn region_check(k: u32, s: f64) -> Result<()> {
    let edge = k as f64 / 2.0 + 1.25 + 0.25;
    if !(s > edge) {
        return Err(Error::domain(format!("s = {s} must exceed {edge} for k = {k}")));
    }
    Ok(())
}

fn sign_for(k: u32) -> Sign {
    Sign::for_parity(Parity::of(k))
}

/// `α(n) = c(|D|) μ(m) χ_D(m) m^{k−1}` with `n = |D| m²`. `None` when `n`
/// has no such decomposition (the coefficient is then absent, i.e. 0).
pub fn alpha(n: u64, g: &PlusForm) -> Result<Option<Rational>> {
    let k = g.k();
    let Some(series) = g.series() else {
        return Err(Error::domain("exact α(n) needs exact coefficients"));
    };
    let Ok((d, m)) = squarefree_decompose(n, Parity::of(k)) else {
        return Ok(None);
    };
    if d.abs() as usize >= g.prec() {
        return Err(Error::domain(format!("|D| = {} beyond prec {}", d.abs(), g.prec())));
    }
    let mu = crate::arith::mobius(m);
    let chi = d.chi(m as i64);
    let c = series.coeff(d.abs() as usize);
    let w = Integer::from(m).pow(k - 1) * (mu * chi) as i32;
    Ok(Some(c * Rational::from(w)))
}

/// `Σ_{n≤N} α(n) n^{−s}`, the tail bounded through `|α(n)| ≤ 2W n^{k/2+1/4}`
/// with `W` the Hecke-bound witness of `g`.
pub fn dg_via_coeffs(g: &PlusForm, s: f64, n_terms: u64, bits: u32) -> Result<LValue> {
    let k = g.k();
    region_check(k, s)?;
    if n_terms as usize >= g.prec() {
        return Err(Error::domain(format!(
            "{n_terms} terms need coefficients beyond prec {}",
            g.prec()
        )));
    }
    let wp = bits + 24;
    let ds = enumerate_discriminants(0, n_terms, sign_for(k), ResidueFilter::All)?;
    let spf = FactorTable::new((crate::arith::isqrt(n_terms) as usize).max(1));
    let parts: Vec<Float> = ds
        .par_iter()
        .map(|&d| {
            let dd = d.abs();
            let mut acc = Float::with_val(wp, 0);
            if !g.is_nonzero(dd as usize) {
                return acc;
            }
            let c = g.coeff_float(dd as usize, wp);
            let mut m = 1u64;
            while dd * m * m <= n_terms {
                let mu = spf.mobius(m as usize);
                let chi = d.chi(m as i64);
                if mu != 0 && chi != 0 {
                    let n = Float::with_val(wp, dd * m * m);
                    let w = Float::with_val(wp, -(n.ln() * s)).exp();
                    let mut t = Float::with_val(wp, &c * &w) * Float::with_val(wp, Integer::from(m).pow(k - 1));
                    if mu * chi < 0 {
                        t = -t;
                    }
                    acc += t;
                }
                m += 1;
            }
            acc
        })
        .collect();
    let mut total = Float::with_val(wp, 0);
    for p in parts {
        total += p;
    }
    let a = k as f64 / 2.0 + 0.25;
    let tail_bound = power_tail(2.0 * g.hecke_witness(), s - a, n_terms);
    Ok(LValue {
        value: Float::with_val(bits, total),
        tail_bound,
        truncation: n_terms,
        bits,
        degraded: tail_bound >= LValue::target(bits),
    })
}

/// Twist-side evaluation together with its diagnostics.
#[derive(Clone, Debug)]
pub struct TwistEvaluation {
    pub value: LValue,
    /// Whether the tail bound is rigorous.
    pub rigorous: bool,
    /// Largest gap between `1/L(χ_D, σ)` and its Möbius series, relative
    /// to the allowed error, when that cross-check ran (`σ > 2`).
    pub mobius_check: Option<f64>,
}

/// `Σ_{|D|≤D_max} c(|D|) |D|^{−s} / L(χ_D, 2s−k+1)` over `(−1)^k D > 0`.
///
/// The tail uses `1/L(χ_D, σ) ≤ ζ(σ)/ζ(2σ)` and the Hecke-bound witness.
pub fn dg_via_twists(g: &PlusForm, s: f64, d_max: u64, bits: u32) -> Result<TwistEvaluation> {
    let k = g.k();
    let sigma = 2.0 * s - k as f64 + 1.0;
    if !(sigma > 1.25) {
        return Err(Error::domain(format!("2s − k + 1 = {sigma} must exceed 1.25")));
    }
    if d_max as usize >= g.prec() {
        return Err(Error::domain(format!("D_max {d_max} beyond prec {}", g.prec())));
    }
    let wp = bits + 24;
    let ds = if d_max == 0 {
        Vec::new()
    } else {
        enumerate_discriminants(0, d_max, sign_for(k), ResidueFilter::All)?
    };
    let target = LValue::target(bits);
    let mob_terms = if sigma > 2.0 {
        // Σ_{m>M} m^{−σ} < target
        let m = (1.0 / ((sigma - 1.0) * target)).powf(1.0 / (sigma - 1.0)).ceil() as usize;
        Some(FactorTable::new(m.max(2)))
    } else {
        None
    };
    struct Term {
        value: Float,
        err: f64,
        mob: Option<f64>,
    }
    let terms: Vec<Result<Term>> = ds
        .par_iter()
        .map(|&d| {
            let dd = d.abs();
            if !g.is_nonzero(dd as usize) {
                return Ok(Term {
                    value: Float::with_val(wp, 0),
                    err: 0.0,
                    mob: None,
                });
            }
            let l = dirichlet_lvalue(d, sigma, bits)?;
            let c = g.coeff_float(dd as usize, wp);
            let w = Float::with_val(wp, -(Float::with_val(wp, dd).ln() * s)).exp();
            let cw = Float::with_val(wp, &c * &w);
            let lv = Float::with_val(wp, &l.value);
            let value = Float::with_val(wp, &cw / &lv);
            let lf = lv.to_f64();
            let err = if l.tail_bound == 0.0 {
                0.0
            } else {
                cw.to_f64().abs() * l.tail_bound / (lf.abs() * (lf.abs() - l.tail_bound).max(f64::MIN_POSITIVE))
            };
            let mob = mob_terms.as_ref().map(|table| {
                let m_max = table.limit();
                let mut inv = Float::with_val(wp, 0);
                for m in 1..=m_max {
                    let mu = table.mobius(m);
                    let chi = d.chi(m as i64);
                    if mu == 0 || chi == 0 {
                        continue;
                    }
                    let t = Float::with_val(wp, -(Float::with_val(wp, m).ln() * sigma)).exp();
                    if mu * chi > 0 {
                        inv += t;
                    } else {
                        inv -= t;
                    }
                }
                let direct = Float::with_val(wp, 1) / &lv;
                let gap = Float::with_val(wp, &inv - &direct).to_f64().abs();
                let mob_tail = (m_max as f64).powf(1.0 - sigma) / (sigma - 1.0);
                let allowed = mob_tail + l.tail_bound / (lf.abs() * (lf.abs() - l.tail_bound).max(f64::MIN_POSITIVE)) + target;
                gap / allowed
            });
            Ok(Term { value, err, mob })
        })
        .collect();
    let mut total = Float::with_val(wp, 0);
    let mut err = 0.0;
    let mut mob: Option<f64> = None;
    for t in terms {
        let t = t?;
        total += t.value;
        err += t.err;
        if let Some(x) = t.mob {
            mob = Some(mob.map_or(x, |m: f64| m.max(x)));
        }
    }
    let zs = zeta(sigma, 64).to_f64() + 1e-12;
    let z2s = zeta(2.0 * sigma, 64).to_f64() - 1e-12;
    let a = k as f64 / 2.0 + 0.25;
    let tail = power_tail(2.0 * g.hecke_witness(), s - a, d_max) * zs / z2s;
    let tail_bound = tail + err;
    Ok(TwistEvaluation {
        value: LValue {
            value: Float::with_val(bits, total),
            tail_bound,
            truncation: d_max,
            bits,
            degraded: tail_bound >= target,
        },
        rigorous: true,
        mobius_check: if mob_terms.is_some() { Some(mob.unwrap_or(0.0)) } else { None },
    })
}

/// `Σ_ν λ_ν L(g_ν, s) / L(f_ν, 2s)`.
pub fn dg_via_quotients(basis: &PlusEigenbasis, lambda: &[Float], s: f64, bits: u32) -> Result<LValue> {
    let k = basis.k;
    region_check(k, s)?;
    if lambda.len() != basis.dimension() {
        return Err(Error::domain(format!(
            "{} coordinates for a {}-dimensional basis",
            lambda.len(),
            basis.dimension()
        )));
    }
    let wp = bits + 24;
    let mut total = Float::with_val(wp, 0);
    let mut tail_bound = 0.0;
    let mut truncation = 0;
    for ((g, f), lam) in basis.forms.iter().zip(&basis.lifts).zip(lambda) {
        if lam.is_zero() {
            continue;
        }
        let num = hecke_lvalue_halfint(g, s, bits)?;
        let den = hecke_euler_product(f, 2.0 * s, bits)?;
        assert!(!den.value.is_zero(), "Euler product vanished inside its region");
        let q = Float::with_val(wp, &num.value / &den.value);
        let (nf, df) = (num.to_f64().abs(), den.to_f64().abs());
        let err = num.tail_bound / df + nf * den.tail_bound / (df * (df - den.tail_bound).max(f64::MIN_POSITIVE));
        tail_bound += lam.to_f64().abs() * err;
        total += Float::with_val(wp, lam * &q);
        truncation = truncation.max(num.truncation);
    }
    Ok(LValue {
        value: Float::with_val(bits, total),
        tail_bound,
        truncation,
        bits,
        degraded: tail_bound >= LValue::target(bits),
    })
}

/// The three evaluations of `D_g(s)` side by side.
#[derive(Clone, Debug)]
pub struct DgEvaluation {
    pub s: f64,
    pub via_coeffs: LValue,
    pub via_twists: TwistEvaluation,
    pub via_quotients: LValue,
}

#[derive(Clone, Debug, Serialize)]
pub struct DgReport {
    pub k: u32,
    pub s: f64,
    pub via_coeffs: LValueReport,
    pub via_twists: LValueReport,
    pub via_quotients: LValueReport,
    pub twists_tail_rigorous: bool,
    pub mobius_check: Option<f64>,
    pub diff_coeffs_twists: f64,
    pub diff_coeffs_quotients: f64,
    pub pass: bool,
}

impl DgEvaluation {
    pub fn run(basis: &PlusEigenbasis, nu: usize, s: f64, n_terms: u64, d_max: u64, bits: u32) -> Result<Self> {
        let g = basis
            .forms
            .get(nu)
            .ok_or_else(|| Error::domain(format!("no eigenform {nu} in a {}-dimensional basis", basis.dimension())))?;
        let mut lambda = vec![Float::with_val(bits, 0); basis.dimension()];
        lambda[nu] = Float::with_val(bits, 1);
        Ok(DgEvaluation {
            s,
            via_coeffs: dg_via_coeffs(g, s, n_terms, bits)?,
            via_twists: dg_via_twists(g, s, d_max, bits)?,
            via_quotients: dg_via_quotients(basis, &lambda, s, bits)?,
        })
    }

    fn diff(a: &LValue, b: &LValue) -> f64 {
        let p = a.bits.max(b.bits);
        Float::with_val(p, &a.value - &b.value).to_f64().abs()
    }

    /// Pairwise differences against the sums of the tail bounds.
    pub fn report(&self, k: u32) -> DgReport {
        let c = &self.via_coeffs;
        let t = &self.via_twists.value;
        let q = &self.via_quotients;
        let d_ct = Self::diff(c, t);
        let d_cq = Self::diff(c, q);
        let pass = d_ct <= c.tail_bound + t.tail_bound
            && d_cq <= c.tail_bound + q.tail_bound
            && self.via_twists.mobius_check.is_none_or(|m| m <= 1.0);
        DgReport {
            k,
            s: self.s,
            via_coeffs: c.report(),
            via_twists: t.report(),
            via_quotients: q.report(),
            twists_tail_rigorous: self.via_twists.rigorous,
            mobius_check: self.via_twists.mobius_check,
            diff_coeffs_twists: d_ct,
            diff_coeffs_quotients: d_cq,
            pass,
        }
    }
}

fn near_pole(x: &Float) -> bool {
    if *x > 0.5 {
        return false;
    }
    let r = Float::with_val(x.prec(), x.round_ref());
    Float::with_val(x.prec(), x - &r).abs() < 1e-6
}

fn gamma_checked(x: Float) -> Result<Float> {
    if near_pole(&x) {
        return Err(Error::domain(format!("Γ argument {} within 10⁻⁶ of a pole", x.to_f64())));
    }
    real_gamma(&x)
}

/// `γ(s)` in its duplicated and its reduced closed form:
/// `(−1)^k 2^{2k−4s} π^{k−1/2−2s} Γ(2s)Γ(k+1/2−s)/(Γ(s)Γ(2k−2s))` and
/// `(−1)^k π^{k−1/2−2s} Γ(s+1/2)/Γ(k−s)`.
pub fn gamma_factor(s: &Float, k: u32, bits: u32) -> Result<(Float, Float)> {
    let wp = bits + 32;
    let s = Float::with_val(wp, s);
    let kf = Float::with_val(wp, k);
    let pi = Float::with_val(wp, rug::float::Constant::Pi);
    let sign = if k.is_multiple_of(2) { 1 } else { -1 };
    let pi_pow = Float::with_val(wp, &pi).pow(Float::with_val(wp, &kf - 0.5f64) - Float::with_val(wp, &s * 2u32));

    let g2s = gamma_checked(Float::with_val(wp, &s * 2u32))?;
    let gkh = gamma_checked(Float::with_val(wp, &kf + 0.5f64) - &s)?;
    let gs = gamma_checked(s.clone())?;
    let g2k = gamma_checked(Float::with_val(wp, &kf * 2u32) - Float::with_val(wp, &s * 2u32))?;
    let two_pow = Float::with_val(wp, 2).pow(Float::with_val(wp, &kf * 2u32) - Float::with_val(wp, &s * 4u32));
    let a = two_pow * &pi_pow * g2s * gkh / (gs * g2k) * sign;

    let gsh = gamma_checked(Float::with_val(wp, &s + 0.5f64))?;
    let gks = gamma_checked(Float::with_val(wp, &kf - &s))?;
    let b = pi_pow * gsh / gks * sign;
    Ok((Float::with_val(bits, a), Float::with_val(bits, b)))
}

/// `δ = 0` for even `k`, 1 for odd.
pub fn delta_parity(k: u32) -> u32 {
    k % 2
}

/// `R(s) = (−1)^k ∏_{j=(k+δ)/2}^{k−1} (j − s) / ∏_{i=0}^{(k−δ)/2−1} (s − 1/2 − i)`,
/// the reduced form of `(−1)^k Γ(k−s)Γ(s+(1+δ−k)/2) / (Γ((k+δ)/2−s)Γ(s+1/2))`.
pub fn rational_r(s: &Float, k: u32, bits: u32) -> Result<Float> {
    let wp = bits + 16;
    let delta = delta_parity(k);
    let d = (k - delta) / 2;
    let s = Float::with_val(wp, s);
    let mut num = Float::with_val(wp, 1);
    for j in (k + delta) / 2..k {
        num *= Float::with_val(wp, j) - Float::with_val(wp, &s);
    }
    let mut den = Float::with_val(wp, 1);
    for i in 0..d {
        let f = Float::with_val(wp, &s - 0.5f64) - i;
        if f.clone().abs() < 1e-6 {
            return Err(Error::domain(format!("R(s) has a pole at s = {}", i as f64 + 0.5)));
        }
        den *= f;
    }
    let sign = if k.is_multiple_of(2) { 1 } else { -1 };
    Ok(Float::with_val(bits, num / den * sign))
}

/// `R(s)` straight from its Γ-quotient.
pub fn rational_r_gamma(s: &Float, k: u32, bits: u32) -> Result<Float> {
    let wp = bits + 32;
    let delta = delta_parity(k);
    let s = Float::with_val(wp, s);
    let kf = Float::with_val(wp, k);
    let g1 = gamma_checked(Float::with_val(wp, &kf - &s))?;
    let g2 = gamma_checked(Float::with_val(wp, (k + delta) / 2) - &s)?;
    let g3 = gamma_checked(Float::with_val(wp, &s + (1.0 + delta as f64 - k as f64) / 2.0))?;
    let g4 = gamma_checked(Float::with_val(wp, &s + 0.5f64))?;
    let sign = if k.is_multiple_of(2) { 1 } else { -1 };
    Ok(Float::with_val(bits, g1 / g2 * g3 / g4 * sign))
}

/// `lim_{s→∞} R(s) = (−1)^{k+(k−δ)/2}`.
pub fn rational_r_limit(k: u32) -> i32 {
    if (k + (k - delta_parity(k)) / 2).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct W4U4Report {
    pub z: (f64, f64),
    pub lhs: Evaluation,
    pub rhs: (f64, f64),
    pub rel_diff: f64,
    pub pass: bool,
}

/// Checks `(g|U₄)(z) = (2/(2k+1)) 2^k (−2iz)^{−k−1/2} g(−1/(4z))`, principal
/// branch for the half-integral power.
pub fn w4_u4_check(g: &PlusForm, z: Complex64, tol: f64) -> Result<W4U4Report> {
    if !(z.im > 0.0) {
        return Err(Error::domain("z must lie in the upper half-plane"));
    }
    let k = g.k();
    let eval_tol = tol * 1e-3;
    let lhs = g.u4().evaluate(z, eval_tol)?;
    let w = -1.0 / (4.0 * z);
    let gw = g.evaluate(w, eval_tol)?;
    let factor = jacobi(2, 2 * k as u64 + 1) as f64 * 2f64.powi(k as i32);
    let power = (Complex64::new(0.0, -2.0) * z).powc(Complex64::new(-(k as f64) - 0.5, 0.0));
    let rhs = gw.value() * power * factor;
    let scale = lhs.value().norm().max(rhs.norm());
    let rel_diff = if scale > 0.0 { (lhs.value() - rhs).norm() / scale } else { 0.0 };
    let slack = (lhs.tail_bound + gw.tail_bound * power.norm() * factor.abs()) / scale.max(f64::MIN_POSITIVE);
    Ok(W4U4Report {
        z: (z.re, z.im),
        lhs,
        rhs: (rhs.re, rhs.im),
        rel_diff,
        pass: rel_diff <= tol + slack,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CoefficientIdentityReport {
    pub d: i64,
    pub p: u64,
    pub nu: usize,
    pub lhs: String,
    pub rhs: String,
    pub exact: bool,
    pub pass: bool,
}

/// `c(|D|p²) − c(|D|)·p·a(p) = c(|D|)(a(p)(1−p) − χ_D(p)p^{k−1})` for every
/// eigenform of the basis.
pub fn coefficient_identity_check(
    basis: &PlusEigenbasis,
    d: FundamentalDiscriminant,
    p: u64,
) -> Result<Vec<CoefficientIdentityReport>> {
    let k = basis.k;
    if d.value() % 4 != 0 {
        return Err(Error::domain(format!("D = {d} is not divisible by 4")));
    }
    if (if k.is_multiple_of(2) { 1 } else { -1 }) * d.value() <= 0 {
        return Err(Error::domain(format!("(−1)^k D > 0 fails for D = {d}")));
    }
    if p.is_multiple_of(2) || !crate::arith::is_squarefree(p) || crate::arith::factorize(p).len() != 1 {
        return Err(Error::domain(format!("{p} is not an odd prime")));
    }
    let n = d.abs() * p * p;
    if n as usize >= basis.prec() {
        return Err(Error::domain(format!("|D|p² = {n} not below prec {}", basis.prec())));
    }
    let chi = d.chi(p as i64);
    let mut out = Vec::new();
    for (nu, (g, f)) in basis.forms.iter().zip(&basis.lifts).enumerate() {
        let a = f.prime_coeff(p)?;
        match (g.series(), a.as_exact()) {
            (Some(series), Some(a)) => {
                let c_d = series.coeff(d.abs() as usize);
                let c_dp = series.coeff(n as usize);
                let a = Rational::from(a);
                let lhs = c_dp - Rational::from(&c_d * &a) * Rational::from(p);
                let pk = Rational::from(Integer::from(p).pow(k - 1) * chi as i32);
                let inner = (&a * Rational::from(1 - p as i64)) - pk;
                let rhs = c_d * inner;
                out.push(CoefficientIdentityReport {
                    d: d.value(),
                    p,
                    nu,
                    pass: lhs == rhs,
                    lhs: lhs.to_string(),
                    rhs: rhs.to_string(),
                    exact: true,
                });
            }
            _ => {
                let bits = g.bits().unwrap_or(256).min(f.bits().unwrap_or(256));
                let wp = bits + 16;
                let a = a.to_float(wp);
                let c_d = g.coeff_float(d.abs() as usize, wp);
                let c_dp = g.coeff_float(n as usize, wp);
                let lhs = c_dp - Float::with_val(wp, &c_d * &a) * p;
                let pk = Float::with_val(wp, Integer::from(p).pow(k - 1) * chi as i32);
                let inner = Float::with_val(wp, &a * (1 - p as i64)) - pk;
                let rhs = Float::with_val(wp, &c_d * &inner);
                let scale = lhs.to_f64().abs().max(rhs.to_f64().abs()).max(f64::MIN_POSITIVE);
                let gap = Float::with_val(wp, &lhs - &rhs).to_f64().abs() / scale;
                out.push(CoefficientIdentityReport {
                    d: d.value(),
                    p,
                    nu,
                    pass: gap <= (-(bits as f64) / 2.0).exp2(),
                    lhs: crate::modforms::format_float(&Float::with_val(bits, &lhs)),
                    rhs: crate::modforms::format_float(&Float::with_val(bits, &rhs)),
                    exact: false,
                });
            }
        }
    }
    Ok(out)
}
