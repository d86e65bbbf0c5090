//! Resonators over the family of fundamental discriminants, their moments,
//! character sums, L-weighted sums and the large-value search.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Float, Rational};
use serde::Serialize;

use crate::arith::{enumerate_discriminants, resonance_family, FundamentalDiscriminant, Parity, PrimeTable, ResidueFilter, Sign};
use crate::error::{Error, Result};
use crate::halfint::PlusForm;
use crate::lfun::TwistedLValues;
use crate::modforms::Eigenform;

const BLOCK: usize = 1 << 16;

/// Optional replacements for the default resonator parameters.
#[derive(Clone, Debug, Default)]
pub struct ResonatorOverrides {
    pub n_max: Option<u64>,
    pub l: Option<f64>,
    /// Closed prime window `[lo, hi]`.
    pub window: Option<(f64, f64)>,
    /// Multiplier on the strength rule `r(p) = L/(√p log p)`.
    pub multiplier: Option<f64>,
}

impl ResonatorOverrides {
    fn any(&self) -> bool {
        self.n_max.is_some() || self.l.is_some() || self.window.is_some() || self.multiplier.is_some()
    }
}

/// One element `n` of the support, squarefree with all primes in the window.
#[derive(Clone, Debug)]
pub struct SupportTerm {
    pub n: u64,
    /// `r(n)`.
    pub r: f64,
    /// `r(n) λ₁(n)`, where `λ₁(n) = a₁(n)/n^{k−1/2}`.
    pub weight: f64,
    /// Indices into the window primes.
    factors: Vec<u32>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResonatorParams {
    #[serde(rename = "X")]
    pub x: u64,
    pub k: u32,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub l: f64,
    pub window: [f64; 2],
    pub strength: f64,
}

/// The Dirichlet polynomial `R(D) = Σ_{n ≤ N} r(n) λ₁(n) χ_D(n)`.
#[derive(Clone, Debug)]
pub struct Resonator {
    x: u64,
    k: u32,
    n_max: u64,
    l: f64,
    window: (f64, f64),
    multiplier: f64,
    overridden: bool,
    primes: Vec<u64>,
    r_p: Vec<f64>,
    lambda_p: Vec<f64>,
    support: Vec<SupportTerm>,
    /// Window primes that occur in some support element.
    active: Vec<u32>,
}

/// `N = ⌊X^{1/24}⌋`.
pub fn default_length(x: u64) -> u64 {
    let mut n = (x as f64).powf(1.0 / 24.0).floor() as u64;
    while ((n + 1) as f64).powi(24) <= x as f64 {
        n += 1;
    }
    n.max(1)
}

/// `L = ⅛√(log N log log N)`, taken as 0 once `log log N ≤ 0`.
pub fn default_l(n: u64) -> f64 {
    let ln = (n.max(1) as f64).ln();
    if ln > 1.0 {
        (ln * ln.ln()).sqrt() / 8.0
    } else {
        0.0
    }
}

pub fn build_resonator(x: u64, f1: &Eigenform, overrides: &ResonatorOverrides) -> Result<Resonator> {
    let n_max = overrides.n_max.unwrap_or_else(|| default_length(x));
    let l = overrides.l.unwrap_or_else(|| default_l(n_max));
    let window = overrides.window.unwrap_or((l * l, l.powi(4)));
    let multiplier = overrides.multiplier.unwrap_or(1.0);
    if !(l >= 0.0 && l.is_finite()) || !multiplier.is_finite() || n_max == 0 {
        return Err(Error::domain(format!("bad resonator parameters N={n_max} L={l} strength={multiplier}")));
    }
    if !(window.0.is_finite() && window.1.is_finite()) {
        return Err(Error::domain("window bounds must be finite"));
    }
    let lo = window.0.ceil().max(2.0) as u64;
    let hi = window.1.floor().max(0.0) as u64;
    let primes = if lo <= hi { PrimeTable::new(hi).range(lo, hi).to_vec() } else { Vec::new() };
    if let Some(&p) = primes.last() {
        if p > f1.prec_primes() {
            return Err(Error::TableExhausted {
                needed: p,
                available: f1.prec_primes(),
            });
        }
    }
    let r_p: Vec<f64> = primes
        .iter()
        .map(|&p| multiplier * l / ((p as f64).sqrt() * (p as f64).ln()))
        .collect();
    let lambda_p = primes
        .iter()
        .map(|&p| f1.normalized_prime_coeff(p))
        .collect::<Result<Vec<_>>>()?;

    let mut support = Vec::new();
    let mut stack = Vec::new();
    dfs(&primes, &r_p, &lambda_p, n_max, 0, 1, 1.0, 1.0, &mut stack, &mut support);
    support.sort_by_key(|t| t.n);
    let mut active: Vec<u32> = support.iter().flat_map(|t| t.factors.iter().copied()).collect();
    active.sort_unstable();
    active.dedup();

    let res = Resonator {
        x,
        k: f1.k(),
        n_max,
        l,
        window,
        multiplier,
        overridden: overrides.any(),
        primes,
        r_p,
        lambda_p,
        support,
        active,
    };
    if res.is_degenerate() {
        log::warn!(
            "degenerate resonator at X = {x} (N = {n_max}, L = {l:.4}): support is {{1}} and R(D) = 1"
        );
    }
    Ok(res)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    primes: &[u64],
    r_p: &[f64],
    lambda_p: &[f64],
    n_max: u64,
    from: usize,
    n: u64,
    r: f64,
    lam: f64,
    stack: &mut Vec<u32>,
    out: &mut Vec<SupportTerm>,
) {
    out.push(SupportTerm {
        n,
        r,
        weight: r * lam,
        factors: stack.clone(),
    });
    for i in from..primes.len() {
        let p = primes[i];
        if n.saturating_mul(p) > n_max {
            break;
        }
        stack.push(i as u32);
        dfs(primes, r_p, lambda_p, n_max, i + 1, n * p, r * r_p[i], lam * lambda_p[i], stack, out);
        stack.pop();
    }
}

impl Resonator {
    pub fn x(&self) -> u64 {
        self.x
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    /// Whether any default was replaced.
    pub fn is_override(&self) -> bool {
        self.overridden
    }

    pub fn regime(&self) -> &'static str {
        if self.overridden {
            "override"
        } else {
            "paper"
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.support.len() == 1
    }

    pub fn parity(&self) -> Parity {
        Parity::of(self.k)
    }

    /// Window primes with `r(p)` and `λ₁(p)`.
    pub fn window_primes(&self) -> impl Iterator<Item = (u64, f64, f64)> + '_ {
        self.primes
            .iter()
            .zip(&self.r_p)
            .zip(&self.lambda_p)
            .map(|((&p, &r), &l)| (p, r, l))
    }

    pub fn support(&self) -> &[SupportTerm] {
        &self.support
    }

    pub fn params(&self) -> ResonatorParams {
        ResonatorParams {
            x: self.x,
            k: self.k,
            n: self.n_max,
            l: self.l,
            window: [self.window.0, self.window.1],
            strength: self.multiplier,
        }
    }

    /// `R(D)`.
    pub fn value(&self, d: FundamentalDiscriminant) -> f64 {
        if self.is_degenerate() {
            return 1.0;
        }
        let mut chi = vec![0i8; self.primes.len()];
        for &i in &self.active {
            chi[i as usize] = d.chi(self.primes[i as usize] as i64);
        }
        self.support
            .iter()
            .map(|t| {
                let s: i8 = t.factors.iter().map(|&i| chi[i as usize]).product();
                t.weight * s as f64
            })
            .sum()
    }

    /// `𝓡 = Π_window (1 + r(p)² λ₁(p)²)`.
    pub fn cal_r(&self) -> f64 {
        self.window_primes().map(|(_, r, l)| 1.0 + r * r * l * l).product()
    }

    /// `X/(2ζ(2)) Σ_n r(n)² λ₁(n)² Π_{p | 2n} p/(p+1)` over the support.
    pub fn diagonal_main(&self, x: u64) -> f64 {
        let lead = 3.0 * x as f64 / (std::f64::consts::PI * std::f64::consts::PI);
        let sum: f64 = self
            .support
            .iter()
            .map(|t| {
                let local: f64 = t
                    .factors
                    .iter()
                    .map(|&i| {
                        let p = self.primes[i as usize] as f64;
                        p / (p + 1.0)
                    })
                    .product();
                t.weight * t.weight * local * (2.0 / 3.0)
            })
            .sum();
        lead * sum
    }
}

/// `R(D)`.
pub fn resonator_value(res: &Resonator, d: FundamentalDiscriminant) -> f64 {
    res.value(d)
}

pub fn cal_r(res: &Resonator) -> f64 {
    res.cal_r()
}

#[derive(Clone, Debug, Serialize)]
pub struct ResonatorStats {
    #[serde(rename = "X")]
    pub x: u64,
    #[serde(rename = "calR")]
    pub cal_r: f64,
    pub moment2: f64,
    pub moment6: f64,
    pub count: u64,
    pub diagonal_main: f64,
    pub holder: bool,
}

/// `moment2³ ≤ count² · moment6`, decided on the exact binary values.
pub fn holder_consistent(moment2: f64, moment6: f64, count: u64) -> bool {
    match (Rational::from_f64(moment2), Rational::from_f64(moment6)) {
        (Some(m2), Some(m6)) => {
            let lhs = Rational::from(&m2 * &m2) * &m2;
            let rhs = m6 * rug::Integer::from(count).square();
            lhs <= rhs
        }
        _ => false,
    }
}

/// Second and sixth moments of `R(D)` over `X < (−1)^k D ≤ 2X`, `D ≡ 1 (mod 4)`.
pub fn moments(res: &Resonator, x: u64) -> Result<ResonatorStats> {
    let family = resonance_family(x, res.parity())?;
    let partial: Vec<(f64, f64)> = family
        .par_chunks(BLOCK)
        .map(|block| {
            let mut s2 = 0.0;
            let mut s6 = 0.0;
            for &d in block {
                let r2 = res.value(d).powi(2);
                s2 += r2;
                s6 += r2 * r2 * r2;
            }
            (s2, s6)
        })
        .collect();
    let (moment2, moment6) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let count = family.len() as u64;
    Ok(ResonatorStats {
        x,
        cal_r: res.cal_r(),
        moment2,
        moment6,
        count,
        diagonal_main: res.diagonal_main(x),
        holder: holder_consistent(moment2, moment6, count),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma1Sum {
    pub u: u64,
    pub brute: i64,
    pub main: f64,
}

/// `Σ χ_D(u)` over the resonance family, with the square-case main term
/// `X/(2ζ(2)) Π_{p | 2u} p/(p+1)` (zero when `u` is not a square).
pub fn charsum_lemma1(u: u64, x: u64, parity: Parity) -> Result<Lemma1Sum> {
    if u == 0 || u.is_multiple_of(2) {
        return Err(Error::domain(format!("u must be odd and positive, got {u}")));
    }
    if u > x {
        return Err(Error::domain(format!("u = {u} exceeds X = {x}")));
    }
    let family = resonance_family(x, parity)?;
    let partial: Vec<i64> = family
        .par_chunks(BLOCK)
        .map(|block| block.iter().map(|d| d.chi(u as i64) as i64).sum())
        .collect();
    let brute = partial.iter().sum();
    let main = if crate::arith::is_square(u) {
        let local: f64 = std::iter::once(2)
            .chain(crate::arith::factorize(u).into_iter().map(|(p, _)| p))
            .map(|p| p as f64 / (p as f64 + 1.0))
            .product();
        3.0 * x as f64 / (std::f64::consts::PI * std::f64::consts::PI) * local
    } else {
        0.0
    };
    Ok(Lemma1Sum { u, brute, main })
}

/// A smooth cutoff `Φ` with `Φ = 1` on the plateau and `Φ = 0` off the support.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmoothWindow {
    support: (f64, f64),
    plateau: (f64, f64),
}

fn bump_edge(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smoothed step: 0 for `t ≤ 0`, 1 for `t ≥ 1`, `C^∞` in between.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = bump_edge(t);
    a / (a + bump_edge(1.0 - t))
}

impl SmoothWindow {
    pub fn new(support: (f64, f64), plateau: (f64, f64)) -> Result<Self> {
        let ok = support.0 >= 0.0 && support.0 < plateau.0 && plateau.0 <= plateau.1 && plateau.1 < support.1;
        if !ok || !support.1.is_finite() {
            return Err(Error::domain(format!(
                "need 0 ≤ a < c ≤ d < b for support {support:?} and plateau {plateau:?}"
            )));
        }
        Ok(SmoothWindow { support, plateau })
    }

    /// Supported on `[1, 2]`, identically 1 on `[1.1, 1.9]`.
    pub fn inner() -> Self {
        SmoothWindow {
            support: (1.0, 2.0),
            plateau: (1.1, 1.9),
        }
    }

    /// Supported on `[1/2, 5/2]`, identically 1 on `[1, 2]`.
    pub fn outer() -> Self {
        SmoothWindow {
            support: (0.5, 2.5),
            plateau: (1.0, 2.0),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn plateau(&self) -> (f64, f64) {
        self.plateau
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (a, b) = self.support;
        let (c, d) = self.plateau;
        if t <= a || t >= b {
            return 0.0;
        }
        smooth_step((t - a) / (c - a)) * smooth_step((b - t) / (b - d))
    }

    /// `∫ Φ` by adaptive Simpson to `1e-12`.
    pub fn integral(&self) -> f64 {
        let (a, b) = self.support;
        let (c, d) = self.plateau;
        let f = |t: f64| self.eval(t);
        adaptive_simpson(&f, a, c, 1e-13) + (d - c) + adaptive_simpson(&f, d, b, 1e-13)
    }
}

pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Sums over `D ≡ 1 (mod 4)`, `(−1)^k D > 0`, weighted by `Φ(|D|/X)`.
#[derive(Clone, Debug, Serialize)]
pub struct WeightedSum {
    /// `Σ L(f, χ_D, k) R(D)² Φ`.
    pub weighted: f64,
    /// `Σ R(D)² Φ`.
    pub moment: f64,
    /// `Σ L(f, χ_D, k) Φ`.
    pub plain: f64,
    /// `Σ Φ`.
    pub mass: f64,
    pub count: u64,
    pub max_tail: f64,
}

impl WeightedSum {
    pub fn weighted_mean(&self) -> f64 {
        self.weighted / self.moment
    }

    pub fn plain_mean(&self) -> f64 {
        self.plain / self.mass
    }

    /// Ratio of the `R²`-weighted mean to the plain mean.
    pub fn observed_shift(&self) -> f64 {
        self.weighted_mean() / self.plain_mean()
    }
}

fn family_in_window(x: u64, parity: Parity, window: &SmoothWindow) -> Result<Vec<FundamentalDiscriminant>> {
    let (a, b) = window.support();
    let lo = (a * x as f64).floor() as u64;
    let hi = (b * x as f64).ceil() as u64;
    enumerate_discriminants(lo, hi.max(lo + 1), Sign::for_parity(parity), ResidueFilter::OneModFour)
}

pub fn weighted_lsum(res: &Resonator, x: u64, lvals: &TwistedLValues, window: &SmoothWindow) -> Result<WeightedSum> {
    if lvals.k() != res.k() {
        return Err(Error::domain(format!(
            "L-values have k = {}, resonator has k = {}",
            lvals.k(),
            res.k()
        )));
    }
    let family = family_in_window(x, res.parity(), window)?;
    let rows: Vec<(f64, f64, f64, f64)> = family
        .par_iter()
        .map(|&d| {
            let phi = window.eval(d.abs() as f64 / x as f64);
            if phi == 0.0 {
                return Ok((0.0, 0.0, 0.0, 0.0));
            }
            let l = lvals.value(d)?;
            Ok((l.to_f64(), res.value(d).powi(2), phi, l.tail_bound))
        })
        .collect::<Result<_>>()?;
    let mut out = WeightedSum {
        weighted: 0.0,
        moment: 0.0,
        plain: 0.0,
        mass: 0.0,
        count: 0,
        max_tail: 0.0,
    };
    for (l, r2, phi, tail) in rows {
        if phi == 0.0 {
            continue;
        }
        out.weighted += l * r2 * phi;
        out.moment += r2 * phi;
        out.plain += l * phi;
        out.mass += phi;
        out.count += 1;
        out.max_tail = out.max_tail.max(tail);
    }
    Ok(out)
}

/// `exp(Σ_window 2 r(p) λ₁(p) λ(p)/√p)` for the target form.
pub fn predicted_shift(res: &Resonator, f_target: &Eigenform) -> Result<f64> {
    if f_target.k() != res.k() {
        return Err(Error::domain(format!(
            "target has weight {}, resonator has weight {}",
            f_target.weight(),
            2 * res.k()
        )));
    }
    let mut e = 0.0;
    for (p, r, l1) in res.window_primes() {
        e += 2.0 * r * l1 * f_target.normalized_prime_coeff(p)? / (p as f64).sqrt();
    }
    Ok(e.exp())
}

/// `exp(1/40 · √(log X / log log X))`.
pub fn large_value_threshold(x: u64) -> f64 {
    let lx = (x as f64).ln();
    let llx = lx.ln();
    if llx <= 0.0 {
        return 1.0;
    }
    ((lx / llx).sqrt() / 40.0).exp()
}

/// Per-form constants `C_ν` in `c_ν(|D|)² = C_ν |D|^{k−1/2} L(f_ν, χ_D, k)`.
#[derive(Clone, Debug, Serialize)]
pub struct WaldspurgerFit {
    pub constant: f64,
    /// `(max − min)/mean` over the samples.
    pub spread: f64,
    pub samples: usize,
    /// Discriminants with `c(|D|) = 0`.
    pub zeros: usize,
    /// Whether every such `L`-value lies within its error bound of 0.
    pub zero_consistent: bool,
}

pub fn waldspurger_fit(g: &PlusForm, lvals: &TwistedLValues, ds: &[FundamentalDiscriminant]) -> Result<WaldspurgerFit> {
    let k = g.k();
    if lvals.k() != k {
        return Err(Error::domain(format!("L-values have k = {}, form has k = {k}", lvals.k())));
    }
    let wp = lvals.bits() + 32;
    let sign = if k.is_multiple_of(2) { 1 } else { -1 };
    let exponent = Float::with_val(wp, 2 * k - 1) / 2u32;
    let rows = ds
        .par_iter()
        .map(|&d| {
            if sign * d.value() <= 0 {
                return Err(Error::domain(format!("(−1)^k D must be positive, got D = {d}")));
            }
            let n = d.abs() as usize;
            if n > g.prec() {
                return Err(Error::precision(format!("c({n}) is beyond the form's precision {}", g.prec())));
            }
            let l = lvals.value(d)?;
            if !g.is_nonzero(n) {
                let tol = l.tail_bound + crate::lfun::LValue::target(l.bits);
                return Ok((None, l.to_f64().abs() <= tol));
            }
            let c = g.coeff_float(n, wp);
            let scale = Float::with_val(wp, d.abs()).pow(&exponent);
            let ratio = Float::with_val(wp, c.square_ref()) / (scale * &l.value);
            Ok((Some(ratio.to_f64()), true))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.0).collect();
    let zeros = rows.iter().filter(|r| r.0.is_none()).count();
    let zero_consistent = rows.iter().all(|r| r.1);
    if ratios.is_empty() {
        return Err(Error::domain("no discriminant with c(|D|) ≠ 0"));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    Ok(WaldspurgerFit {
        constant: mean,
        spread: (max - min) / mean.abs(),
        samples: ratios.len(),
        zeros,
        zero_consistent,
    })
}

#[derive(Clone, Debug, Default)]
pub struct SearchParams {
    /// The constant `A` in `L(f₁) > A Σ_{ν≥2} L(f_ν)`.
    pub a: f64,
    pub top_fraction: f64,
    /// Family members used for the global means; `None` uses the whole family.
    pub sample: Option<usize>,
    /// Fitted `C_ν`, one per form, enabling the coefficient lower bound.
    pub waldspurger: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TopEntry {
    #[serde(rename = "D")]
    pub d: i64,
    #[serde(rename = "R2")]
    pub r2: f64,
    #[serde(rename = "L")]
    pub l: Vec<f64>,
    pub waldspurger_c_lower: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchSummary {
    pub count: u64,
    pub top_count: usize,
    pub sample_size: usize,
    pub best_d: i64,
    /// `L(f₁) > A Σ_{ν≥2} L(f_ν)` at the best discriminant.
    pub best_condition: bool,
    /// Number of top discriminants satisfying the condition.
    pub condition_count: usize,
    pub threshold: f64,
    /// Per form: mean central value over the top discriminants.
    pub top_means: Vec<f64>,
    /// Per form: mean central value over the sample.
    pub global_means: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchReport {
    pub top: Vec<TopEntry>,
    pub summary: SearchSummary,
    /// `R²`-weighted over plain mean of `L(f₁)` on the sample.
    pub observed_shift: f64,
}

/// Ranks the family by `R(D)²` and evaluates every form's central value on
/// the top fraction. `lvals[0]` is `f₁`.
pub fn search_large(res: &Resonator, x: u64, lvals: &[TwistedLValues], params: &SearchParams) -> Result<SearchReport> {
    if lvals.is_empty() {
        return Err(Error::domain("need at least one form"));
    }
    if lvals.iter().any(|l| l.k() != res.k()) {
        return Err(Error::domain("L-value tables must match the resonator's weight"));
    }
    if !(params.top_fraction > 0.0 && params.top_fraction <= 1.0) {
        return Err(Error::domain(format!("top fraction {} outside (0, 1]", params.top_fraction)));
    }
    if let Some(c) = &params.waldspurger {
        if c.len() != lvals.len() {
            return Err(Error::domain("one Waldspurger constant per form is required"));
        }
    }
    let family = resonance_family(x, res.parity())?;
    let count = family.len();
    let mut ranked: Vec<(f64, FundamentalDiscriminant)> = family
        .par_chunks(BLOCK)
        .flat_map_iter(|b| b.iter().map(|&d| (res.value(d).powi(2), d)).collect::<Vec<_>>())
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.abs().cmp(&b.1.abs())));
    let top_count = ((params.top_fraction * count as f64).ceil() as usize).clamp(1, count.max(1));
    if count == 0 {
        return Err(Error::domain(format!("empty family at X = {x}")));
    }

    let k = res.k();
    let evaluate = |d: FundamentalDiscriminant| -> Result<Vec<f64>> {
        lvals.iter().map(|t| t.value(d).map(|l| l.to_f64())).collect()
    };
    let top_vals = ranked[..top_count]
        .par_iter()
        .map(|&(_, d)| evaluate(d))
        .collect::<Result<Vec<_>>>()?;
    let top: Vec<TopEntry> = ranked[..top_count]
        .iter()
        .zip(&top_vals)
        .map(|(&(r2, d), l)| TopEntry {
            d: d.value(),
            r2,
            l: l.clone(),
            waldspurger_c_lower: params.waldspurger.as_ref().map(|c| {
                let scale = (d.abs() as f64).powf(k as f64 - 0.5);
                let lead = (c[0] * scale * l[0].max(0.0)).sqrt();
                let rest: f64 = (1..l.len()).map(|nu| (c[nu] * scale * l[nu].max(0.0)).sqrt()).sum();
                lead - rest
            }),
        })
        .collect();
    let holds = |l: &[f64]| l[0] > params.a * l[1..].iter().sum::<f64>();
    let condition_count = top_vals.iter().filter(|l| holds(l)).count();

    let step = match params.sample {
        Some(s) if s > 0 && s < count => count.div_ceil(s),
        _ => 1,
    };
    let sample: Vec<FundamentalDiscriminant> = family.iter().step_by(step).copied().collect();
    let sample_vals = sample.par_iter().map(|&d| evaluate(d)).collect::<Result<Vec<_>>>()?;
    let r = lvals.len();
    let mean = |rows: &[Vec<f64>], nu: usize| rows.iter().map(|l| l[nu]).sum::<f64>() / rows.len() as f64;
    let mut weighted = 0.0;
    let mut moment = 0.0;
    for (d, l) in sample.iter().zip(&sample_vals) {
        let r2 = res.value(*d).powi(2);
        weighted += l[0] * r2;
        moment += r2;
    }
    let global_means: Vec<f64> = (0..r).map(|nu| mean(&sample_vals, nu)).collect();
    let observed_shift = (weighted / moment) / global_means[0];

    Ok(SearchReport {
        summary: SearchSummary {
            count: count as u64,
            top_count,
            sample_size: sample.len(),
            best_d: top[0].d,
            best_condition: holds(&top_vals[0]),
            condition_count,
            threshold: large_value_threshold(x),
            top_means: (0..r).map(|nu| mean(&top_vals, nu)).collect(),
            global_means,
        },
        top,
        observed_shift,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Shift {
    pub predicted: f64,
    pub observed: f64,
}

/// The report emitted by a resonance run.
#[derive(Clone, Debug, Serialize)]
pub struct ResonanceReport {
    pub params: ResonatorParams,
    #[serde(rename = "calR")]
    pub cal_r: f64,
    pub moment2: f64,
    pub moment6: f64,
    pub diagonal_main: f64,
    pub shift: Shift,
    pub top: Vec<TopEntry>,
    pub lemma1: Vec<Lemma1Sum>,
    pub regime: &'static str,
    pub bits: u32,
    pub count: u64,
    pub holder: bool,
    pub summary: SearchSummary,
}

impl ResonanceReport {
    /// One row per top discriminant.
    pub fn to_csv(&self) -> String {
        let r = self.top.first().map_or(0, |t| t.l.len());
        let mut out = String::from("D,R2");
        for nu in 1..=r {
            out.push_str(&format!(",L{nu}"));
        }
        out.push_str(",waldspurger_c_lower\n");
        for t in &self.top {
            out.push_str(&format!("{},{:e}", t.d, t.r2));
            for l in &t.l {
                out.push_str(&format!(",{l:e}"));
            }
            match t.waldspurger_c_lower {
                Some(c) => out.push_str(&format!(",{c:e}\n")),
                None => out.push_str(",\n"),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{factorize, is_squarefree, kronecker_symbol};
    use crate::modforms::hecke_eigenforms;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn delta() -> &'static Eigenform {
        static F: OnceLock<Eigenform> = OnceLock::new();
        F.get_or_init(|| hecke_eigenforms(12, 5000, 128).unwrap().remove(0))
    }

    fn window(lo: f64, hi: f64, n: u64) -> ResonatorOverrides {
        ResonatorOverrides {
            n_max: Some(n),
            window: Some((lo, hi)),
            l: Some(1.0),
            multiplier: None,
        }
    }

    fn lambda(p: u64) -> f64 {
        delta().normalized_prime_coeff(p).unwrap()
    }

    #[test]
    fn empty_window_is_degenerate() {
        let res = build_resonator(1_000_000, delta(), &window(24.0, 28.0, 1000)).unwrap();
        assert!(res.is_degenerate());
        assert_eq!(res.cal_r(), 1.0);
        let d = FundamentalDiscriminant::new(5).unwrap();
        assert_eq!(res.value(d), 1.0);
        assert_eq!(predicted_shift(&res, delta()).unwrap(), 1.0);
    }

    #[test]
    fn paper_defaults_degenerate_at_desk_scale() {
        assert_eq!(default_length(1_000_000), 1);
        assert_eq!(default_l(1), 0.0);
        assert_eq!(default_length(1 << 24), 2);
        assert!((default_l(1000) - (1000f64.ln() * 1000f64.ln().ln()).sqrt() / 8.0).abs() < 1e-15);
        let res = build_resonator(1_000_000, delta(), &ResonatorOverrides::default()).unwrap();
        assert!(res.is_degenerate());
        assert_eq!(res.regime(), "paper");
    }

    #[test]
    fn support_matches_enumeration() {
        let res = build_resonator(1_000_000, delta(), &window(11.0, 53.0, 1000)).unwrap();
        let expect: Vec<u64> = (1..=1000u64)
            .filter(|&n| is_squarefree(n) && factorize(n).iter().all(|&(p, _)| (11..=53).contains(&p)))
            .collect();
        let got: Vec<u64> = res.support().iter().map(|t| t.n).collect();
        assert_eq!(got, expect);
        assert_eq!(res.support()[0].weight, 1.0);
        for t in res.support() {
            let r: f64 = factorize(t.n).iter().map(|&(p, _)| 1.0 / ((p as f64).sqrt() * (p as f64).ln())).product();
            assert!((t.r - r).abs() <= 1e-15 * r);
        }
        for (_, r, _) in res.window_primes() {
            assert!(r <= 1.0);
        }
    }

    #[test]
    fn value_vanishes_off_coprime_discriminants() {
        let res = build_resonator(100, delta(), &window(3.0, 7.0, 200)).unwrap();
        let d = FundamentalDiscriminant::new(105).unwrap();
        assert_eq!(res.value(d), 1.0);
    }

    #[test]
    fn two_term_resonator() {
        let res = build_resonator(100, delta(), &window(13.0, 13.0, 20)).unwrap();
        let r = 1.0 / (13f64.sqrt() * 13f64.ln());
        for d in [5i64, 17, 21, 29, 53] {
            let fd = FundamentalDiscriminant::new(d).unwrap();
            let hand = 1.0 + r * lambda(13) * kronecker_symbol(d, 13) as f64;
            assert!((res.value(fd) - hand).abs() < 1e-15);
        }
        assert!((res.cal_r() - (1.0 + r * r * lambda(13).powi(2))).abs() < 1e-15);
    }

    #[test]
    fn cal_r_log_inequality() {
        let res = build_resonator(1_000_000, delta(), &window(11.0, 53.0, 1000)).unwrap();
        let s: f64 = res.window_primes().map(|(_, r, l)| r * r * l * l).sum();
        let c = res.cal_r();
        assert!(c > 1.0 && c < s.exp());
    }

    #[test]
    fn degenerate_moments_count() {
        let res = build_resonator(5000, delta(), &ResonatorOverrides::default()).unwrap();
        let st = moments(&res, 5000).unwrap();
        assert_eq!(st.moment2, st.count as f64);
        assert_eq!(st.moment6, st.count as f64);
        assert!(st.holder);
        let brute = (5001..=10000i64)
            .filter(|&d| d % 4 == 1 && is_squarefree(d as u64))
            .count();
        assert_eq!(st.count as usize, brute);
    }

    #[test]
    fn holder_exactness() {
        assert!(holder_consistent(3.0, 3.0, 3));
        assert!(!holder_consistent(3.0, 2.9999999, 3));
        assert!(holder_consistent(0.0, 0.0, 0));
    }

    #[test]
    fn charsum_against_direct_scan() {
        let x = 20_000u64;
        for (u, parity) in [(1u64, Parity::Even), (9, Parity::Odd), (15, Parity::Even), (25, Parity::Odd)] {
            let got = charsum_lemma1(u, x, parity).unwrap();
            let sign = parity.sign();
            let brute: i64 = (x as i64 + 1..=2 * x as i64)
                .map(|m| sign * m)
                .filter(|d| d.rem_euclid(4) == 1 && is_squarefree(d.unsigned_abs()))
                .map(|d| kronecker_symbol(d, u as i64) as i64)
                .sum();
            assert_eq!(got.brute, brute, "u = {u}");
        }
        let m = charsum_lemma1(9, 1000, Parity::Even).unwrap().main;
        let expect = 1000.0 / (2.0 * std::f64::consts::PI.powi(2) / 6.0) * (2.0 / 3.0) * 0.75;
        assert!((m - expect).abs() < 1e-9);
        assert_eq!(charsum_lemma1(3, 1000, Parity::Even).unwrap().main, 0.0);
        assert!(charsum_lemma1(4, 1000, Parity::Even).is_err());
    }

    #[test]
    fn smooth_window_shape() {
        for w in [SmoothWindow::inner(), SmoothWindow::outer()] {
            let (a, b) = w.support();
            let (c, d) = w.plateau();
            for i in 0..=1000 {
                let t = a - 0.5 + (b - a + 1.0) * i as f64 / 1000.0;
                let v = w.eval(t);
                assert!((0.0..=1.0).contains(&v));
                if t <= a || t >= b {
                    assert_eq!(v, 0.0);
                }
                if t >= c && t <= d {
                    assert_eq!(v, 1.0);
                }
            }
        }
        // each edge integrates to half its width by the symmetry S(t) + S(1−t) = 1
        assert!((SmoothWindow::inner().integral() - 0.9).abs() < 1e-12);
        assert!((SmoothWindow::outer().integral() - 1.5).abs() < 1e-12);
        let w = SmoothWindow::new((0.0, 3.0), (1.0, 1.5)).unwrap();
        assert!((w.integral() - 1.75).abs() < 1e-12);
        assert!(SmoothWindow::new((1.0, 2.0), (0.5, 1.5)).is_err());
    }

    #[test]
    fn shift_for_target_and_other_form() {
        let res = build_resonator(100, delta(), &window(11.0, 53.0, 1000)).unwrap();
        assert!(predicted_shift(&res, delta()).unwrap() > 1.0);
        let fs = hecke_eigenforms(24, 200, 128).unwrap();
        let res = build_resonator(10_000, &fs[0], &window(3.0, 50.0, 50)).unwrap();
        let s1 = predicted_shift(&res, &fs[0]).unwrap().ln();
        let s2 = predicted_shift(&res, &fs[1]).unwrap().ln();
        assert!(s1 > 0.0 && s2.abs() < s1);
        assert!(predicted_shift(&res, delta()).is_err());
    }

    #[test]
    fn degenerate_weighted_sum_is_plain_average() {
        let res = build_resonator(300, delta(), &ResonatorOverrides::default()).unwrap();
        let lv = TwistedLValues::new(delta(), 600, 40).unwrap();
        let w = weighted_lsum(&res, 300, &lv, &SmoothWindow::inner()).unwrap();
        assert_eq!(w.weighted, w.plain);
        assert_eq!(w.moment, w.mass);
        assert!(w.weighted >= 0.0);
        assert!((w.observed_shift() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_exhaustion() {
        let r = build_resonator(100, delta(), &window(11.0, 9000.0, 100));
        assert!(matches!(r, Err(Error::TableExhausted { .. })));
    }

    #[test]
    fn csv_layout() {
        let res = build_resonator(300, delta(), &window(11.0, 53.0, 200)).unwrap();
        let lv = TwistedLValues::new(delta(), 600, 40).unwrap();
        let params = SearchParams {
            a: 1.0,
            top_fraction: 0.05,
            sample: Some(10),
            waldspurger: None,
        };
        let s = search_large(&res, 300, std::slice::from_ref(&lv), &params).unwrap();
        assert!(s.summary.top_count >= 1);
        assert!(s.top.windows(2).all(|w| w[0].r2 >= w[1].r2));
        let st = moments(&res, 300).unwrap();
        let report = ResonanceReport {
            params: res.params(),
            cal_r: st.cal_r,
            moment2: st.moment2,
            moment6: st.moment6,
            diagonal_main: st.diagonal_main,
            shift: Shift {
                predicted: predicted_shift(&res, delta()).unwrap(),
                observed: s.observed_shift,
            },
            top: s.top.clone(),
            lemma1: vec![],
            regime: res.regime(),
            bits: 40,
            count: st.count,
            holder: st.holder,
            summary: s.summary.clone(),
        };
        let csv = report.to_csv();
        assert!(csv.starts_with("D,R2,L1,waldspurger_c_lower\n"));
        assert_eq!(csv.lines().count(), s.top.len() + 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn value_matches_direct_kronecker(lo in 3u64..40, width in 0u64..40, n in 1u64..2000, m in 0.1f64..3.0, idx in 0usize..400) {
            let ov = ResonatorOverrides { n_max: Some(n), window: Some((lo as f64, (lo + width) as f64)), l: Some(1.0), multiplier: Some(m) };
            let res = build_resonator(1000, delta(), &ov).unwrap();
            let fam = resonance_family(1000, Parity::Even).unwrap();
            let d = fam[idx % fam.len()];
            let direct: f64 = res.support().iter().map(|t| {
                let lam: f64 = factorize(t.n).iter().map(|&(p, _)| lambda(p)).product();
                t.r * lam * kronecker_symbol(d.value(), t.n as i64) as f64
            }).sum();
            prop_assert!((res.value(d) - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }

        #[test]
        fn holder_always(lo in 3u64..30, width in 0u64..30, n in 1u64..500, m in 0.1f64..4.0) {
            let ov = ResonatorOverrides { n_max: Some(n), window: Some((lo as f64, (lo + width) as f64)), l: Some(1.0), multiplier: Some(m) };
            let res = build_resonator(3000, delta(), &ov).unwrap();
            let st = moments(&res, 3000).unwrap();
            prop_assert!(st.holder);
            prop_assert!(st.moment2 >= 0.0);
        }
    }
}
