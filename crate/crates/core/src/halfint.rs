//! Cusp forms of weight `k + 1/2` in Kohnen's plus space on `Γ₀(4)`.
//!
//! The space is cut out of the span of `θ^{2k+1−4j} F^j` by linear
//! conditions on the coefficients; the result is accepted only when its
//! dimension equals `dim S_{2k}`. Hecke eigenforms are separated with the
//! plus-space operator `T⁺(9)` and paired with their Shimura lifts.

use num_complex::Complex64;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::arith::{divisors, is_fundamental, isqrt, jacobi, mobius, FundamentalDiscriminant};
use crate::error::{Error, Result};
use crate::modforms::eigen;
use crate::modforms::{
    dim_cusp_forms, hecke_eigenforms, CoeffValue, Eigenform, DEFAULT_BITS,
};
use crate::qseries::{echelonize, header_value, linear_solve, parse_header, ExactSeries};

/// `θ = 1 + 2Σ_{m≥1} q^{m²}`.
pub fn theta(prec: usize) -> ExactSeries {
    let mut terms = Vec::new();
    let mut m = 0usize;
    while m * m < prec {
        terms.push((m * m, Integer::from(if m == 0 { 1 } else { 2 })));
        m += 1;
    }
    ExactSeries::from_terms(prec, terms)
}

/// `F = Σ_{n odd} σ₁(n) qⁿ`, weight 2 on `Γ₀(4)`.
pub fn weight_two_f(prec: usize) -> ExactSeries {
    if prec == 0 {
        return ExactSeries::zero(0);
    }
    let mut sigma = crate::arith::sigma_table(prec - 1, 1);
    for (n, s) in sigma.iter_mut().enumerate() {
        if n % 2 == 0 {
            *s = Integer::new();
        }
    }
    ExactSeries::from_integers(prec, sigma)
}

/// Whether `c(n)` may be nonzero: `(−1)^k n ≡ 0, 1 (mod 4)`.
pub fn plus_allowed(k: u32, n: usize) -> bool {
    let r = n % 4;
    let r = if k.is_multiple_of(2) { r } else { (4 - r) % 4 };
    r <= 1
}

/// Exponent in the Hecke bound `|c(n)| ≪ n^{k/2+1/4}`.
fn hecke_exponent(k: u32) -> f64 {
    k as f64 / 2.0 + 0.25
}

#[derive(Clone, Debug)]
pub enum PlusCoeffs {
    Exact(ExactSeries),
    Numeric { bits: u32, values: Vec<Float> },
}

/// Coefficient table `c(n)`, `0 ≤ n < prec`, of a form of weight `k + 1/2`.
///
/// Forms built by the constructors here satisfy the plus-space conditions;
/// images under [`PlusForm::u4`] generally do not.
#[derive(Clone, Debug)]
pub struct PlusForm {
    k: u32,
    prec: usize,
    coeffs: PlusCoeffs,
    lambda: Option<Vec<Float>>,
    witness: f64,
}

/// A value of `g(z)` with the bound on the omitted terms.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Evaluation {
    pub re: f64,
    pub im: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

impl Evaluation {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

impl PlusForm {
    fn raw(k: u32, coeffs: PlusCoeffs) -> Self {
        let prec = match &coeffs {
            PlusCoeffs::Exact(s) => s.prec(),
            PlusCoeffs::Numeric { values, .. } => values.len(),
        };
        let mut g = PlusForm {
            k,
            prec,
            coeffs,
            lambda: None,
            witness: 0.0,
        };
        g.witness = g.stored_witness();
        g
    }

    /// Wraps an exact series, checking `c(0) = 0` and the plus-space residue
    /// conditions at every stored exponent.
    pub fn from_series(k: u32, series: ExactSeries) -> Result<Self> {
        if let Some((n, _)) = series
            .nonzero_numerators()
            .find(|&(n, _)| n == 0 || !plus_allowed(k, n))
        {
            return Err(Error::ConstructionInvalid(format!(
                "coefficient c({n}) is nonzero but excluded for k = {k}"
            )));
        }
        Ok(Self::raw(k, PlusCoeffs::Exact(series)))
    }

    pub fn zero(k: u32, prec: usize) -> Self {
        Self::raw(k, PlusCoeffs::Exact(ExactSeries::zero(prec)))
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn prec(&self) -> usize {
        self.prec
    }

    pub fn coeffs(&self) -> &PlusCoeffs {
        &self.coeffs
    }

    pub fn series(&self) -> Option<&ExactSeries> {
        match &self.coeffs {
            PlusCoeffs::Exact(s) => Some(s),
            PlusCoeffs::Numeric { .. } => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.coeffs, PlusCoeffs::Exact(_))
    }

    /// Mantissa precision of numeric coefficients.
    pub fn bits(&self) -> Option<u32> {
        match &self.coeffs {
            PlusCoeffs::Exact(_) => None,
            PlusCoeffs::Numeric { bits, .. } => Some(*bits),
        }
    }

    /// Coordinates in a plus-space eigenbasis, when attached.
    pub fn lambda(&self) -> Option<&[Float]> {
        self.lambda.as_deref()
    }

    pub fn with_lambda(mut self, lambda: Vec<Float>) -> Self {
        self.lambda = Some(lambda);
        self
    }

    /// `max_{1≤n<prec} |c(n)| / n^{k/2+1/4}`.
    pub fn hecke_witness(&self) -> f64 {
        self.witness
    }

    fn stored_witness(&self) -> f64 {
        let a = hecke_exponent(self.k);
        (1..self.prec)
            .map(|n| self.coeff_f64(n).abs() / (n as f64).powf(a))
            .fold(0.0, f64::max)
    }

    fn check_index(&self, n: usize) {
        assert!(n < self.prec, "c({n}) requested beyond prec {}", self.prec);
    }

    pub fn exact_coeff(&self, n: usize) -> Option<Rational> {
        self.check_index(n);
        match &self.coeffs {
            PlusCoeffs::Exact(s) => Some(s.coeff(n)),
            PlusCoeffs::Numeric { .. } => None,
        }
    }

    pub fn coeff_float(&self, n: usize, prec: u32) -> Float {
        self.check_index(n);
        match &self.coeffs {
            PlusCoeffs::Exact(s) => Float::with_val(prec, &s.coeff(n)),
            PlusCoeffs::Numeric { values, .. } => Float::with_val(prec, &values[n]),
        }
    }

    pub fn coeff_f64(&self, n: usize) -> f64 {
        self.check_index(n);
        match &self.coeffs {
            PlusCoeffs::Exact(s) => s.coeff(n).to_f64(),
            PlusCoeffs::Numeric { values, .. } => values[n].to_f64(),
        }
    }

    /// Whether `c(n)` is nonzero; numeric values count as zero below
    /// `2^{−bits/2}` times the Hecke-bound scale at `n`.
    pub fn is_nonzero(&self, n: usize) -> bool {
        self.check_index(n);
        match &self.coeffs {
            PlusCoeffs::Exact(s) => *s.numerator(n) != 0,
            PlusCoeffs::Numeric { bits, values } => {
                let scale = self.witness.max(f64::MIN_POSITIVE)
                    * (n.max(1) as f64).powf(hecke_exponent(self.k));
                values[n].to_f64().abs() > scale * (-(*bits as f64) / 2.0).exp2()
            }
        }
    }

    pub fn first_nonzero(&self) -> Option<usize> {
        (0..self.prec).find(|&n| self.is_nonzero(n))
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let coeffs = match &self.coeffs {
            PlusCoeffs::Exact(s) => PlusCoeffs::Exact(s.scale(c)),
            PlusCoeffs::Numeric { bits, values } => PlusCoeffs::Numeric {
                bits: *bits,
                values: values.iter().map(|v| Float::with_val(*bits, v * c)).collect(),
            },
        };
        Self::raw(self.k, coeffs)
    }

    /// Rescaled so that the first nonzero coefficient is 1.
    pub fn normalized(&self) -> Self {
        let Some(n0) = self.first_nonzero() else {
            return self.clone();
        };
        match &self.coeffs {
            PlusCoeffs::Exact(s) => {
                let c = Rational::from(1) / s.coeff(n0);
                self.scale(&c)
            }
            PlusCoeffs::Numeric { bits, values } => {
                let lead = values[n0].clone();
                let mut v: Vec<Float> = values
                    .iter()
                    .enumerate()
                    .map(|(n, x)| {
                        if n < n0 {
                            Float::with_val(*bits, 0)
                        } else {
                            Float::with_val(*bits, x / &lead)
                        }
                    })
                    .collect();
                v[n0] = Float::with_val(*bits, 1);
                Self::raw(
                    self.k,
                    PlusCoeffs::Numeric {
                        bits: *bits,
                        values: v,
                    },
                )
            }
        }
    }

    /// `Σ c(4n) qⁿ` with precision `⌊prec/4⌋`. The image is not a plus form;
    /// its witness is bounded through the parent's.
    pub fn u4(&self) -> PlusForm {
        let prec = self.prec / 4;
        let coeffs = match &self.coeffs {
            PlusCoeffs::Exact(s) => {
                let terms: Vec<(usize, Rational)> = s
                    .nonzero_numerators()
                    .filter(|&(n, _)| n % 4 == 0 && n / 4 < prec)
                    .map(|(n, _)| (n / 4, s.coeff(n)))
                    .collect();
                PlusCoeffs::Exact(ExactSeries::from_rationals(prec, &terms))
            }
            PlusCoeffs::Numeric { bits, values } => PlusCoeffs::Numeric {
                bits: *bits,
                values: (0..prec).map(|n| values[4 * n].clone()).collect(),
            },
        };
        let mut g = Self::raw(self.k, coeffs);
        g.witness = g.witness.max(4f64.powf(hecke_exponent(self.k)) * self.witness);
        g
    }

    /// `g(z) = Σ c(n) e^{2πinz}` in double precision, stopping once the
    /// bound `Σ_{n≥N} 2·witness·n^{k/2+1/4}|q|ⁿ` falls well below `tol`.
    pub fn evaluate(&self, z: Complex64, tol: f64) -> Result<Evaluation> {
        if !(z.im > 0.0) || !z.re.is_finite() {
            return Err(Error::domain(format!("evaluation point {z} is not in the upper half-plane")));
        }
        let rho = (-2.0 * std::f64::consts::PI * z.im).exp();
        let x = z.re - z.re.floor();
        let q = Complex64::from_polar(rho, 2.0 * std::f64::consts::PI * x);
        let c = 2.0 * self.witness;
        let a = hecke_exponent(self.k);
        let tail = |n: usize| -> f64 {
            if c == 0.0 {
                return 0.0;
            }
            let n = n.max(1) as f64;
            let ratio = ((n + 1.0) / n).powf(a) * rho;
            if ratio >= 1.0 {
                return f64::INFINITY;
            }
            c * (a * n.ln() + n * rho.ln()).exp() / (1.0 - ratio)
        };
        let stop = tol * (-20f64).exp2();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut qn = Complex64::new(1.0, 0.0);
        let mut n = 0;
        while n < self.prec {
            let cn = self.coeff_f64(n);
            if cn != 0.0 {
                acc += qn * cn;
            }
            qn *= q;
            n += 1;
            if n > 1 && tail(n) <= stop {
                break;
            }
        }
        let tail_bound = if n < self.prec || c == 0.0 { tail(n) } else { tail(self.prec) };
        if tail_bound > tol {
            return Err(Error::precision(format!(
                "tail bound {tail_bound:e} at n = {n} exceeds tolerance {tol:e}"
            )));
        }
        Ok(Evaluation {
            re: acc.re,
            im: acc.im,
            tail_bound,
            terms: n,
        })
    }

    /// First fundamental `D` with `4 | D`, `(−1)^k D > 0` and `c(|D|) ≠ 0`.
    pub fn kohnen_witness(&self) -> Option<FundamentalDiscriminant> {
        let sign = if self.k.is_multiple_of(2) { 1 } else { -1 };
        (1..self.prec / 4 + 1)
            .map(|m| 4 * m)
            .filter(|&n| n < self.prec)
            .find(|&n| {
                let d = sign * n as i64;
                is_fundamental(d).unwrap_or(false) && self.is_nonzero(n)
            })
            .map(|n| FundamentalDiscriminant::new(sign * n as i64).expect("checked fundamental"))
    }

    /// Cache text: header `# k=<k> prec=<M>` then `n,num/den` lines.
    pub fn to_text(&self) -> Result<String> {
        let PlusCoeffs::Exact(s) = &self.coeffs else {
            return Err(Error::domain("only exact forms have a text representation"));
        };
        let mut out = format!("# k={} prec={}\n", self.k, self.prec);
        s.write_coefficient_lines(&mut out);
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let fields = parse_header(header, 1)?;
        let k: u32 = header_value(&fields, "k", 1)?;
        let prec: usize = header_value(&fields, "prec", 1)?;
        let s = ExactSeries::parse_coefficient_lines(prec, lines.map(|(i, l)| (i + 1, l)))?;
        Self::from_series(k, s)
    }
}

/// Echelon basis of `S⁺_{k+1/2}` with exact rational coefficients.
#[derive(Clone, Debug)]
pub struct PlusSpace {
    pub k: u32,
    pub prec: usize,
    /// Constraint cutoff that produced the accepted solution space.
    pub cutoff: usize,
    pub basis: Vec<ExactSeries>,
    pub pivots: Vec<usize>,
}

fn generators(k: u32, prec: usize) -> Vec<ExactSeries> {
    let t = theta(prec);
    let t4 = t.square().square();
    let f = weight_two_f(prec);
    let top = (2 * k + 1) / 4;
    let base = t.pow((2 * k + 1) % 4);
    let mut t4_pows = vec![ExactSeries::one(prec)];
    let mut f_pows = vec![ExactSeries::one(prec)];
    for _ in 0..top {
        let next = t4_pows.last().unwrap().mul(&t4);
        t4_pows.push(next);
        let next = f_pows.last().unwrap().mul(&f);
        f_pows.push(next);
    }
    (0..=top as usize)
        .map(|j| base.mul(&t4_pows[top as usize - j]).mul(&f_pows[j]))
        .collect()
}

/// Coordinates (in the generators) of a basis of the solution space with
/// constraints up to `cutoff`.
fn constrained_kernel(k: u32, cutoff: usize) -> Result<Vec<Vec<Rational>>> {
    let gens = generators(k, cutoff + 1);
    let mut constraints = vec![(0, Rational::new())];
    constraints.extend((1..=cutoff).filter(|&n| !plus_allowed(k, n)).map(|n| (n, Rational::new())));
    Ok(linear_solve(&gens, &constraints)?.kernel_coords)
}

/// Builds `S⁺_{k+1/2}` to precision `prec`, checking its dimension against
/// `dim S_{2k}`.
pub fn plus_space(k: u32, prec: usize) -> Result<PlusSpace> {
    if k == 0 {
        return Err(Error::domain("k must be positive"));
    }
    let min_prec = 20 * (k as usize + 2);
    if prec < min_prec {
        return Err(Error::domain(format!(
            "prec {prec} below the solver headroom {min_prec} for k = {k}"
        )));
    }
    let r = dim_cusp_forms(2 * k);
    let mut cutoff = min_prec;
    for attempt in 0..2 {
        let coords = constrained_kernel(k, cutoff)?;
        if coords.len() == r {
            let gens = generators(k, prec);
            let combos: Vec<ExactSeries> = coords
                .iter()
                .map(|x| {
                    x.iter()
                        .zip(&gens)
                        .fold(ExactSeries::zero(prec), |acc, (c, g)| acc.axpy(c, g))
                })
                .collect();
            let ech = echelonize(&combos);
            if ech.rows.len() != r {
                return Err(Error::ConstructionInvalid(format!(
                    "plus space for k = {k} collapsed to dimension {} at full precision",
                    ech.rows.len()
                )));
            }
            for b in &ech.rows {
                if let Some((n, _)) = b.nonzero_numerators().find(|&(n, _)| n == 0 || !plus_allowed(k, n)) {
                    return Err(Error::ConstructionInvalid(format!(
                        "plus-space element has excluded coefficient c({n}) for k = {k}"
                    )));
                }
            }
            return Ok(PlusSpace {
                k,
                prec,
                cutoff,
                basis: ech.rows,
                pivots: ech.pivots,
            });
        }
        if attempt == 0 {
            log::debug!(
                "plus space for k = {k}: dimension {} != {r} at cutoff {cutoff}, retrying",
                coords.len()
            );
            cutoff *= 2;
        } else {
            return Err(Error::ConstructionInvalid(format!(
                "plus space for k = {k} has dimension {} at cutoff {cutoff}, expected {r}",
                coords.len()
            )));
        }
    }
    unreachable!()
}

/// Result of testing `c(n²|D|) = c(|D|) Σ_{d|n} μ(d)χ_D(d)d^{k−1}a(n/d)`.
#[derive(Clone, Debug, Serialize)]
pub struct ShimuraReport {
    pub d: i64,
    pub n_max: u64,
    pub checked: usize,
    pub exact: bool,
    /// Largest deviation relative to the size of the summands; exactly 0
    /// on success of an exact check.
    pub max_deviation: f64,
    pub pass: bool,
}

/// Tests the Shimura coefficient relation between `g` and its lift `f` for
/// `1 ≤ n ≤ n_max`.
pub fn shimura_check(
    g: &PlusForm,
    f: &Eigenform,
    d: FundamentalDiscriminant,
    n_max: u64,
) -> Result<ShimuraReport> {
    let k = g.k();
    if f.k() != k {
        return Err(Error::domain(format!(
            "lift has weight {}, expected {}",
            f.weight(),
            2 * k
        )));
    }
    let sign = if k.is_multiple_of(2) { 1 } else { -1 };
    if sign * d.value() <= 0 {
        return Err(Error::domain(format!("(−1)^k D > 0 fails for k = {k}, D = {d}")));
    }
    let dd = d.abs();
    if (n_max * n_max).saturating_mul(dd) >= g.prec() as u64 {
        return Err(Error::domain(format!(
            "n_max² |D| = {} not below prec {}",
            (n_max * n_max).saturating_mul(dd),
            g.prec()
        )));
    }
    let mut report = ShimuraReport {
        d: d.value(),
        n_max,
        checked: 0,
        exact: g.is_exact() && f.is_exact(),
        max_deviation: 0.0,
        pass: true,
    };
    if report.exact {
        let base = g.exact_coeff(dd as usize).unwrap();
        for n in 1..=n_max {
            let mut sum = Integer::new();
            for e in divisors(n) {
                let mu = mobius(e);
                let chi = d.chi(e as i64);
                if mu == 0 || chi == 0 {
                    continue;
                }
                let a = f.coeff_at(n / e)?;
                let a = a.as_exact().expect("exact lift");
                let term = Integer::from(e).pow(k - 1) * a;
                if mu * chi > 0 {
                    sum += term;
                } else {
                    sum -= term;
                }
            }
            let rhs = Rational::from(&base * &Rational::from(sum));
            let lhs = g.exact_coeff((n * n * dd) as usize).unwrap();
            if lhs != rhs {
                report.pass = false;
                let scale = lhs.to_f64().abs().max(rhs.to_f64().abs());
                let dev = (Rational::from(&lhs - &rhs)).to_f64().abs() / scale;
                report.max_deviation = report.max_deviation.max(dev);
            }
            report.checked += 1;
        }
        return Ok(report);
    }
    let bits = g.bits().unwrap_or(u32::MAX).min(f.bits().unwrap_or(u32::MAX));
    let wp = bits + 16;
    let base = g.coeff_float(dd as usize, wp);
    for n in 1..=n_max {
        let mut sum = Float::with_val(wp, 0);
        let mut mag = Float::with_val(wp, 0);
        for e in divisors(n) {
            let mu = mobius(e);
            let chi = d.chi(e as i64);
            if mu == 0 || chi == 0 {
                continue;
            }
            let a = f.coeff_at(n / e)?.to_float(wp);
            let term = a * Float::with_val(wp, Integer::from(e).pow(k - 1));
            mag += Float::with_val(wp, term.abs_ref());
            if mu * chi > 0 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        let rhs = Float::with_val(wp, &base * &sum);
        let lhs = g.coeff_float((n * n * dd) as usize, wp);
        let scale = Float::with_val(wp, base.abs_ref()) * mag;
        let scale = scale.to_f64().max(lhs.to_f64().abs());
        let diff = Float::with_val(wp, &lhs - &rhs).to_f64().abs();
        let dev = if scale > 0.0 { diff / scale } else { diff };
        report.max_deviation = report.max_deviation.max(dev);
        report.checked += 1;
    }
    report.pass = report.max_deviation <= (-(bits as f64) / 2.0).exp2();
    Ok(report)
}

/// First fundamental `D` with `(−1)^k D > 0`.
pub fn first_admissible_discriminant(k: u32) -> FundamentalDiscriminant {
    let d = if k.is_multiple_of(2) { 1 } else { -3 };
    FundamentalDiscriminant::new(d).expect("1 and −3 are fundamental")
}

/// Hecke eigenforms `g_ν` of `S⁺_{k+1/2}` paired with their lifts `f_ν`,
/// ordered like the lifts.
#[derive(Clone, Debug)]
pub struct PlusEigenbasis {
    pub k: u32,
    pub space: PlusSpace,
    pub forms: Vec<PlusForm>,
    pub lifts: Vec<Eigenform>,
    /// Shimura check at the first admissible discriminant for each pair.
    pub checks: Vec<ShimuraReport>,
}

/// Plus-space eigenbasis to precision `prec` with freshly built lifts.
pub fn plus_space_basis(k: u32, prec: usize) -> Result<PlusEigenbasis> {
    let space = plus_space(k, prec)?;
    if space.basis.is_empty() {
        return plus_eigenbasis(space, &[], DEFAULT_BITS);
    }
    let prec_primes = (isqrt(prec as u64) + 1).max(3);
    let lifts = hecke_eigenforms(2 * k, prec_primes, DEFAULT_BITS)?;
    plus_eigenbasis(space, &lifts, DEFAULT_BITS)
}

/// `T⁺(p²)` applied to a coefficient function, evaluated at `n`.
fn kohnen_hecke(b: &ExactSeries, k: u32, p: usize, n: usize) -> Rational {
    let sign: i64 = if k.is_multiple_of(2) { 1 } else { -1 };
    let mut x = b.coeff(p * p * n);
    let leg = jacobi(sign * n as i64, p as u64);
    if leg != 0 {
        let t = Rational::from(Integer::from(p).pow(k - 1) * leg) * b.coeff(n);
        x += t;
    }
    if n.is_multiple_of(p * p) {
        x += Rational::from(Integer::from(p).pow(2 * k - 1)) * b.coeff(n / (p * p));
    }
    x
}

/// Pairs the plus space with the given lifts; numeric eigen-data is kept at
/// `bits` of mantissa.
pub fn plus_eigenbasis(space: PlusSpace, lifts: &[Eigenform], bits: u32) -> Result<PlusEigenbasis> {
    let k = space.k;
    let r = space.basis.len();
    if lifts.len() != r {
        return Err(Error::domain(format!(
            "{} lifts supplied for a {r}-dimensional plus space",
            lifts.len()
        )));
    }
    if let Some(f) = lifts.iter().find(|f| f.k() != k) {
        return Err(Error::domain(format!("lift of weight {} for k = {k}", f.weight())));
    }
    let forms: Vec<PlusForm> = if r == 0 {
        Vec::new()
    } else if r == 1 {
        vec![PlusForm::from_series(k, space.basis[0].clone())?.normalized()]
    } else {
        let p = 3usize;
        let last = *space.pivots.last().unwrap();
        if p * p * last >= space.prec {
            return Err(Error::domain(format!(
                "prec {} too small for T⁺(9) on pivots up to {last}",
                space.prec
            )));
        }
        let m: Vec<Vec<Rational>> = space
            .basis
            .iter()
            .map(|b| space.pivots.iter().map(|&j| kohnen_hecke(b, k, p, j)).collect())
            .collect();
        let work = bits + 64;
        let cp = eigen::charpoly(&m);
        let roots = eigen::real_roots(&cp, work)?;
        if roots.len() != r {
            return Err(Error::ConstructionInvalid(format!(
                "T⁺(9) has {} real eigenvalues on a {r}-dimensional space",
                roots.len()
            )));
        }
        let mut forms = Vec::with_capacity(r);
        let mut used = vec![false; r];
        for f in lifts {
            let a3 = f.prime_coeff(3)?.to_f64();
            let (idx, gap) = roots
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .map(|(i, x)| (i, (x.to_f64() - a3).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("unused root remains");
            if gap > 1e-6 * a3.abs().max(1.0) {
                return Err(Error::ConstructionInvalid(format!(
                    "no T⁺(9) eigenvalue matches a(3) = {a3} of lift {}",
                    f.label()
                )));
            }
            used[idx] = true;
            let v = eigen::left_eigenvector(&m, &roots[idx], work)?;
            let values: Vec<Float> = (0..space.prec)
                .map(|n| {
                    let mut acc = Float::with_val(work, 0);
                    for (vi, b) in v.iter().zip(&space.basis) {
                        if *b.numerator(n) != 0 {
                            acc += Float::with_val(work, vi * &b.coeff(n));
                        }
                    }
                    Float::with_val(bits, &acc)
                })
                .collect();
            forms.push(PlusForm::raw(k, PlusCoeffs::Numeric { bits, values }).normalized());
        }
        forms
    };
    let d = first_admissible_discriminant(k);
    let n_max = isqrt((space.prec as u64 - 1) / d.abs());
    let mut checks = Vec::with_capacity(r);
    for (g, f) in forms.iter().zip(lifts) {
        let n_max = n_max.min(isqrt(f.prec_primes().max(1)).max(1)).min(n_max);
        let report = shimura_check(g, f, d, n_max.min(f.prec_primes()))?;
        if !report.pass {
            return Err(Error::ConstructionInvalid(format!(
                "plus form paired with lift {} fails the Shimura relation at D = {d} (deviation {:e})",
                f.label(),
                report.max_deviation
            )));
        }
        checks.push(report);
    }
    Ok(PlusEigenbasis {
        k,
        space,
        forms,
        lifts: lifts.to_vec(),
        checks,
    })
}

impl PlusEigenbasis {
    pub fn dimension(&self) -> usize {
        self.forms.len()
    }

    pub fn prec(&self) -> usize {
        self.space.prec
    }

    /// Coordinates `λ_ν` of `g` in the eigenbasis, read off at the echelon
    /// pivots.
    pub fn coordinates(&self, g: &PlusForm, bits: u32) -> Result<Vec<Float>> {
        if g.k() != self.k {
            return Err(Error::domain("form and basis have different weights"));
        }
        let r = self.dimension();
        let wp = bits + 32;
        let mut a: Vec<Vec<Float>> = self
            .space
            .pivots
            .iter()
            .map(|&j| {
                let mut row: Vec<Float> = self.forms.iter().map(|h| h.coeff_float(j, wp)).collect();
                row.push(g.coeff_float(j, wp));
                row
            })
            .collect();
        for c in 0..r {
            let piv = (c..r)
                .max_by(|&i, &j| a[i][c].clone().abs().total_cmp(&a[j][c].clone().abs()))
                .unwrap();
            if a[piv][c].is_zero() {
                return Err(Error::precision("singular eigenbasis matrix"));
            }
            a.swap(c, piv);
            for i in 0..r {
                if i != c {
                    let f = Float::with_val(wp, &a[i][c] / &a[c][c]);
                    for j in c..=r {
                        let t = Float::with_val(wp, &f * &a[c][j]);
                        a[i][j] -= t;
                    }
                }
            }
        }
        Ok((0..r).map(|i| Float::with_val(bits, &a[i][r] / &a[i][i])).collect())
    }

    /// The Kohnen witness `D` (with `4 | D`) for each eigenform.
    pub fn kohnen_witnesses(&self) -> Vec<Option<FundamentalDiscriminant>> {
        self.forms.iter().map(PlusForm::kohnen_witness).collect()
    }

    /// Eigenvalue-wise `a_ν(n)` of the lifts, as a convenience.
    pub fn lift_coeff(&self, nu: usize, n: u64) -> Result<CoeffValue> {
        self.lifts[nu].coeff_at(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{enumerate_discriminants, ResidueFilter, Sign};

    fn int(s: &ExactSeries, n: usize) -> i64 {
        s.integer_coeff(n).unwrap().to_i64().unwrap()
    }

    #[test]
    fn theta_and_f() {
        let t = theta(30);
        assert!(theta(1000).is_sparse());
        assert_eq!(int(&t, 0), 1);
        assert_eq!(int(&t, 4), 2);
        assert_eq!(int(&t, 3), 0);
        let f = weight_two_f(30);
        assert_eq!(int(&f, 1), 1);
        assert_eq!(int(&f, 2), 0);
        assert_eq!(int(&f, 9), 13);
        assert_eq!(int(&f, 15), 24);
    }

    #[test]
    fn theta_squared_is_weight_two_relation() {
        // θ⁴ = 1 + 8 Σ_{4∤d|n} d qⁿ (Jacobi four squares)
        let prec = 60;
        let t4 = theta(prec).pow(4);
        for n in 1..prec {
            let s: i64 = divisors(n as u64).iter().filter(|&&d| d % 4 != 0).map(|&d| d as i64).sum();
            assert_eq!(int(&t4, n), 8 * s, "n = {n}");
        }
    }

    #[test]
    fn residue_rule() {
        assert!(plus_allowed(6, 1) && plus_allowed(6, 4) && !plus_allowed(6, 2) && !plus_allowed(6, 3));
        assert!(plus_allowed(7, 3) && plus_allowed(7, 4) && !plus_allowed(7, 1) && !plus_allowed(7, 2));
    }

    fn k6() -> PlusEigenbasis {
        plus_space_basis(6, 400).unwrap()
    }

    #[test]
    fn weight_thirteen_halves() {
        let b = k6();
        assert_eq!(b.dimension(), 1);
        let g = &b.forms[0];
        assert!(g.is_exact());
        let c = |n| g.exact_coeff(n).unwrap();
        assert_eq!(c(0), 0);
        assert_eq!(c(1), 1);
        assert_eq!(c(2), 0);
        assert_eq!(c(3), 0);
        assert_eq!(c(4), -56);
        assert_eq!(c(5), 120);
        assert_eq!(c(8), -240);
        assert_eq!(c(9), 9);
        assert_eq!(c(12), 1440);
        assert_eq!(c(20), Rational::from(8) * c(5));
        assert!(b.checks[0].pass && b.checks[0].exact);
    }

    #[test]
    fn prec_below_headroom_is_rejected() {
        assert!(plus_space(6, 100).is_err());
        assert!(plus_space(0, 1000).is_err());
    }

    #[test]
    fn empty_spaces() {
        // dim S_14 = 0
        let b = plus_space_basis(7, 400).unwrap();
        assert_eq!(b.dimension(), 0);
    }

    #[test]
    fn odd_k_form() {
        // k = 9: S_18 is one-dimensional
        let b = plus_space_basis(9, 600).unwrap();
        assert_eq!(b.dimension(), 1);
        let g = &b.forms[0];
        for n in 0..g.prec() {
            if !plus_allowed(9, n) {
                assert_eq!(g.exact_coeff(n).unwrap(), 0);
            }
        }
        let d = FundamentalDiscriminant::new(-4).unwrap();
        assert!(shimura_check(g, &b.lifts[0], d, 10).unwrap().pass);
    }

    #[test]
    fn shimura_relation_all_small_discriminants() {
        let b = k6();
        let (g, f) = (&b.forms[0], &b.lifts[0]);
        let ds = enumerate_discriminants(0, 60, Sign::Positive, ResidueFilter::All).unwrap();
        for d in ds.into_iter().take(10) {
            let n_max = isqrt((g.prec() as u64 - 1) / d.abs());
            let rep = shimura_check(g, f, d, n_max).unwrap();
            assert!(rep.pass, "{rep:?}");
            assert_eq!(rep.checked as u64, n_max);
        }
        let five = FundamentalDiscriminant::new(5).unwrap();
        assert!(shimura_check(g, f, five, 20).is_err());
        assert!(shimura_check(g, f, FundamentalDiscriminant::new(-4).unwrap(), 2).is_err());
    }

    #[test]
    fn broken_pairing_is_detected() {
        let b = k6();
        let g = b.forms[0].scale(&Rational::from(1));
        // perturb one coefficient that the check reads
        let mut s = g.series().unwrap().clone();
        s = s.add(&ExactSeries::monomial(16, Integer::from(1), s.prec()));
        let bad = PlusForm::from_series(6, s).unwrap();
        let rep = shimura_check(&bad, &b.lifts[0], FundamentalDiscriminant::new(1).unwrap(), 4).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn rejects_excluded_coefficients() {
        let s = ExactSeries::monomial(2, Integer::from(1), 10);
        assert!(PlusForm::from_series(6, s).is_err());
        let s = ExactSeries::monomial(0, Integer::from(1), 10);
        assert!(PlusForm::from_series(6, s).is_err());
    }

    #[test]
    fn kohnen_witness_found() {
        let b = k6();
        let d = b.kohnen_witnesses()[0].unwrap();
        assert_eq!(d.value() % 4, 0);
        assert!(b.forms[0].is_nonzero(d.abs() as usize));
    }

    #[test]
    fn u4_picks_every_fourth() {
        let b = k6();
        let g = &b.forms[0];
        let u = g.u4();
        assert_eq!(u.prec(), g.prec() / 4);
        assert_eq!(u.exact_coeff(0).unwrap(), 0);
        assert_eq!(u.exact_coeff(1).unwrap(), -56);
        for n in 0..u.prec() {
            assert_eq!(u.exact_coeff(n), g.exact_coeff(4 * n));
        }
    }

    #[test]
    fn evaluate_basics() {
        let b = k6();
        let g = &b.forms[0];
        let z = PlusForm::zero(6, 100).evaluate(Complex64::new(0.0, 1.0), 1e-30).unwrap();
        assert_eq!(z.value(), Complex64::new(0.0, 0.0));
        let e = g.evaluate(Complex64::new(0.0, 1.0), 1e-30).unwrap();
        assert!(e.value().norm() > 0.0);
        assert!(e.tail_bound < 1e-30);
        // direct oracle
        let q = (-2.0 * std::f64::consts::PI).exp();
        let direct: f64 = (1..40).map(|n| g.coeff_f64(n) * q.powi(n as i32)).sum();
        assert!((e.re - direct).abs() < 1e-15 * direct.abs());
        let a = g.evaluate(Complex64::new(0.25, 0.3), 1e-12).unwrap();
        let c = g.evaluate(Complex64::new(1.25, 0.3), 1e-12).unwrap();
        assert_eq!(a.value(), c.value());
        assert!(g.evaluate(Complex64::new(0.0, -1.0), 1e-3).is_err());
        assert!(g.evaluate(Complex64::new(0.0, 0.001), 1e-3).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let b = k6();
        let g = &b.forms[0];
        let text = g.to_text().unwrap();
        assert!(text.starts_with("# k=6 prec=400\n1,1/1\n4,-56/1\n"));
        let back = PlusForm::parse(&text).unwrap();
        assert_eq!(back.series(), g.series());
        assert!(PlusForm::parse("# k=6 prec=10\n2,1/1\n").is_err());
    }

    #[test]
    fn weight_24_eigenbasis() {
        // k = 12: two eigenforms, separated by T⁺(9)
        let b = plus_space_basis(12, 800).unwrap();
        assert_eq!(b.dimension(), 2);
        for (g, f) in b.forms.iter().zip(&b.lifts) {
            assert!(!g.is_exact());
            for d in [1i64, 5, 8, 12] {
                let d = FundamentalDiscriminant::new(d).unwrap();
                let n_max = isqrt((g.prec() as u64 - 1) / d.abs()).min(f.prec_primes());
                let rep = shimura_check(g, f, d, n_max).unwrap();
                assert!(rep.pass, "{rep:?}");
            }
            assert_eq!(g.coeff_f64(g.first_nonzero().unwrap()), 1.0);
        }
        // coordinates of an eigenform in its own basis
        let lam = b.coordinates(&b.forms[1], 64).unwrap();
        assert!((lam[0].to_f64()).abs() < 1e-15);
        assert!((lam[1].to_f64() - 1.0).abs() < 1e-15);
        // a basis element of the exact space decomposes with nonzero weights
        let e = PlusForm::from_series(12, b.space.basis[0].clone()).unwrap();
        let lam = b.coordinates(&e, 64).unwrap();
        assert!(lam.iter().all(|x| !x.is_zero()));
    }
}
