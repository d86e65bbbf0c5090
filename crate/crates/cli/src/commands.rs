use rayon::prelude::*;
use serde::Serialize;

use mfres::arith::{enumerate_discriminants, FundamentalDiscriminant, Parity, ResidueFilter, Sign};
use mfres::dseries::{DgEvaluation, DgReport};
use mfres::halfint::{PlusEigenbasis, ShimuraReport};
use mfres::lfun::{afe_truncation, central_lvalue, lvalue_csv, LValueReport, TwistedLValues};
use mfres::modforms::{dim_cusp_forms, Eigenform, EigenformSummary};
use mfres::resonance::{
    build_resonator, charsum_lemma1, moments, predicted_shift, search_large, waldspurger_fit, Lemma1Sum,
    ResonanceReport, ResonatorOverrides, SearchParams, Shift,
};

use crate::cache::{CacheManifest, CacheStatus};
use crate::{cache_root, emit_text, to_json, CharsumArgs, CliError, DseriesArgs, Format, Global, ResonateArgs};

pub fn open_cache(g: &Global) -> Result<CacheManifest, CliError> {
    CacheManifest::open(cache_root(&g.cache))
}

fn check_weight(weight: u32) -> Result<(), CliError> {
    if weight < 12 || !weight.is_multiple_of(2) {
        return Err(CliError::Usage(format!("weight must be even and at least 12, got {weight}")));
    }
    if dim_cusp_forms(weight) == 0 {
        return Err(CliError::Usage(format!("there are no cusp forms of weight {weight}")));
    }
    Ok(())
}

fn form_index(nu: usize, r: usize) -> Result<usize, CliError> {
    if nu == 0 || nu > r {
        return Err(CliError::Usage(format!("--nu must lie in 1..={r}, got {nu}")));
    }
    Ok(nu - 1)
}

#[derive(Serialize)]
struct FormsBuildReport {
    kind: &'static str,
    weight: u32,
    prec_primes: u64,
    bits: Option<u32>,
    forms: Vec<EigenformSummary>,
    cache: CacheStatus,
}

pub fn forms_build(g: &Global, weight: u32, prec: u64) -> Result<(), CliError> {
    check_weight(weight)?;
    if prec < 2 {
        return Err(CliError::Usage("--prec must be at least 2".into()));
    }
    let cache = open_cache(g)?;
    let (forms, status) = cache.eigenforms(weight, prec, g.bits)?;
    let report = FormsBuildReport {
        kind: "eigenform",
        weight,
        prec_primes: forms[0].prec_primes(),
        bits: forms[0].bits(),
        forms: forms.iter().map(|f| f.summary()).collect(),
        cache: status,
    };
    emit_text(&to_json(&report), g.out.as_deref())
}

#[derive(Serialize)]
struct PlusBuildReport {
    k: u32,
    prec: usize,
    dimension: usize,
    cutoff: usize,
    pivots: Vec<usize>,
    checks: Vec<ShimuraReport>,
    cache: CacheStatus,
}

pub fn plus_prec_floor(k: u32) -> usize {
    20 * (k as usize + 2)
}

pub fn plus_basis(cache: &CacheManifest, k: u32, prec: usize, bits: u32) -> Result<(PlusEigenbasis, CacheStatus), CliError> {
    if k == 0 {
        return Err(CliError::Usage("k must be positive".into()));
    }
    if prec < plus_prec_floor(k) {
        return Err(CliError::Usage(format!(
            "--prec must be at least {} for k = {k}",
            plus_prec_floor(k)
        )));
    }
    cache.plus_basis(k, prec, bits)
}

pub fn plus_build(g: &Global, k: u32, prec: usize) -> Result<(), CliError> {
    let cache = open_cache(g)?;
    let (basis, status) = plus_basis(&cache, k, prec, g.bits)?;
    let report = PlusBuildReport {
        k,
        prec,
        dimension: basis.dimension(),
        cutoff: basis.space.cutoff,
        pivots: basis.space.pivots.clone(),
        checks: basis.checks.clone(),
        cache: status,
    };
    emit_text(&to_json(&report), g.out.as_deref())
}

/// Eigenforms of weight `2k` with tables long enough for `|D| ≤ max_abs_d`.
pub fn forms_for_lvalues(cache: &CacheManifest, k: u32, max_abs_d: u64, bits: u32, min_primes: u64) -> Result<Vec<Eigenform>, CliError> {
    check_weight(2 * k)?;
    let need = afe_truncation(k, max_abs_d.max(1), bits).max(min_primes).max(2);
    Ok(cache.eigenforms(2 * k, need, bits.max(64))?.0)
}

#[derive(Serialize)]
struct LvalueOut {
    k: u32,
    #[serde(rename = "D")]
    d: i64,
    nu: usize,
    #[serde(flatten)]
    value: LValueReport,
}

pub fn lvalue(g: &Global, k: u32, d: i64, nu: usize) -> Result<(), CliError> {
    let disc = FundamentalDiscriminant::new(d)?;
    let cache = open_cache(g)?;
    let forms = forms_for_lvalues(&cache, k, disc.abs(), g.bits, 0)?;
    let f = &forms[form_index(nu, forms.len())?];
    let l = central_lvalue(f, disc, g.bits)?;
    let out = LvalueOut {
        k,
        d,
        nu,
        value: l.report(),
    };
    emit_text(&to_json(&out), g.out.as_deref())
}

#[derive(Serialize)]
struct BatchRow {
    #[serde(rename = "D")]
    d: i64,
    parity: &'static str,
    #[serde(flatten)]
    value: LValueReport,
}

#[derive(Serialize)]
struct BatchOut {
    k: u32,
    nu: usize,
    bits: u32,
    count: usize,
    rows: Vec<BatchRow>,
}

pub fn lvalue_batch(g: &Global, k: u32, from: u64, to: u64, nu: usize, one_mod_four: bool, format: Format) -> Result<(), CliError> {
    let filter = if one_mod_four { ResidueFilter::OneModFour } else { ResidueFilter::All };
    let ds = enumerate_discriminants(from, to, Sign::for_parity(Parity::of(k)), filter)?;
    let cache = open_cache(g)?;
    let forms = forms_for_lvalues(&cache, k, to, g.bits, 0)?;
    let f = &forms[form_index(nu, forms.len())?];
    let tw = TwistedLValues::new(f, to, g.bits)?;
    let values = ds.par_iter().map(|&d| tw.value(d)).collect::<Result<Vec<_>, _>>()?;
    let text = match format {
        Format::Csv => lvalue_csv(ds.iter().copied().zip(values.iter())),
        Format::Json => to_json(&BatchOut {
            k,
            nu,
            bits: g.bits,
            count: ds.len(),
            rows: ds
                .iter()
                .zip(&values)
                .map(|(d, l)| BatchRow {
                    d: d.value(),
                    parity: if d.chi_minus_one() > 0 { "even" } else { "odd" },
                    value: l.report(),
                })
                .collect(),
        }),
    };
    emit_text(&text, g.out.as_deref())
}

#[derive(Serialize)]
pub struct CharsumOut {
    pub u: u64,
    #[serde(rename = "X")]
    pub x: u64,
    pub k: u32,
    pub brute: i64,
    pub main: f64,
    /// `|brute − main|/main` when `u` is a square.
    pub relative_error: Option<f64>,
    /// `X^{0.7}`, the size allowed for the non-square case.
    pub bound: f64,
}

pub fn charsum_report(u: u64, x: u64, k: u32) -> Result<CharsumOut, CliError> {
    let s: Lemma1Sum = charsum_lemma1(u, x, Parity::of(k))?;
    Ok(CharsumOut {
        u,
        x,
        k,
        brute: s.brute,
        main: s.main,
        relative_error: (s.main > 0.0).then(|| (s.brute as f64 - s.main).abs() / s.main),
        bound: (x as f64).powf(0.7),
    })
}

pub fn charsum(g: &Global, a: &CharsumArgs) -> Result<(), CliError> {
    let out = charsum_report(a.u, a.x, a.k)?;
    emit_text(&to_json(&out), g.out.as_deref())
}

pub fn dseries_report(cache: &CacheManifest, k: u32, s: f64, nu: usize, terms: u64, dmax: u64, bits: u32) -> Result<DgReport, CliError> {
    let prec = (terms.max(dmax) as usize + 1).max(plus_prec_floor(k));
    let (basis, _) = plus_basis(cache, k, prec, bits)?;
    let idx = form_index(nu, basis.dimension())?;
    Ok(DgEvaluation::run(&basis, idx, s, terms, dmax, bits)?.report(k))
}

pub fn dseries(g: &Global, a: &DseriesArgs) -> Result<(), CliError> {
    let cache = open_cache(g)?;
    let report = dseries_report(&cache, a.k, a.s, a.nu, a.terms, a.dmax, g.bits)?;
    emit_text(&to_json(&report), g.out.as_deref())?;
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Check("D_g evaluations disagree beyond their tail bounds".into()))
    }
}

fn parse_window(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("--window expects lo:hi, got `{s}`"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo <= hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// The first `count` admissible discriminants with `c(|D|) ≠ 0`, plus every
/// admissible one passed over on the way (for the zero check).
pub fn waldspurger_sample(g: &mfres::halfint::PlusForm, count: usize) -> Result<Vec<FundamentalDiscriminant>, CliError> {
    let k = g.k();
    let ds = enumerate_discriminants(0, g.prec() as u64 - 1, Sign::for_parity(Parity::of(k)), ResidueFilter::All)?;
    let mut out = Vec::new();
    let mut nonzero = 0;
    for d in ds {
        out.push(d);
        if g.is_nonzero(d.abs() as usize) {
            nonzero += 1;
            if nonzero == count {
                return Ok(out);
            }
        }
    }
    Err(CliError::Compute(format!(
        "only {nonzero} nonzero coefficients at admissible |D| below {}",
        g.prec()
    )))
}

/// Fitted `C_ν` for every eigenform of weight `k + 1/2`.
pub fn waldspurger_constants(cache: &CacheManifest, k: u32, bits: u32) -> Result<Vec<mfres::resonance::WaldspurgerFit>, CliError> {
    let prec = 2000.max(plus_prec_floor(k) + 1);
    let (basis, _) = plus_basis(cache, k, prec, bits.max(64))?;
    let samples = basis
        .forms
        .iter()
        .map(|g| waldspurger_sample(g, 20))
        .collect::<Result<Vec<_>, _>>()?;
    let max_d = samples.iter().flatten().map(|d| d.abs()).max().unwrap_or(1);
    let forms = forms_for_lvalues(cache, k, max_d, bits, 0)?;
    basis
        .forms
        .iter()
        .zip(&forms)
        .zip(&samples)
        .map(|((g, f), ds)| {
            let tw = TwistedLValues::new(f, max_d, bits)?;
            Ok(waldspurger_fit(g, &tw, ds)?)
        })
        .collect()
}

pub fn resonate(g: &Global, a: &ResonateArgs) -> Result<(), CliError> {
    let window = a.window.as_deref().map(parse_window).transpose()?;
    let lemma1_u: Vec<u64> = a
        .lemma1
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| CliError::Usage(format!("bad --lemma1 entry `{s}`"))))
        .collect::<Result<_, _>>()?;
    if a.lvalue_bits < 16 {
        return Err(CliError::Usage("--lvalue-bits must be at least 16".into()));
    }
    let overrides = ResonatorOverrides {
        n_max: a.nmax,
        l: a.l,
        window,
        multiplier: a.strength,
    };
    let cache = open_cache(g)?;
    let window_top = window.map_or(0, |w| w.1.max(0.0) as u64);
    let forms = forms_for_lvalues(&cache, a.k, 2 * a.x, a.lvalue_bits, window_top)?;
    let res = build_resonator(a.x, &forms[0], &overrides)?;
    let stats = moments(&res, a.x)?;
    if stats.count == 0 {
        return Err(CliError::Usage(format!("the family at X = {} is empty", a.x)));
    }
    let lvals = forms
        .iter()
        .map(|f| TwistedLValues::new(f, 2 * a.x, a.lvalue_bits))
        .collect::<Result<Vec<_>, _>>()?;
    let constants: Vec<f64> = waldspurger_constants(&cache, a.k, a.lvalue_bits.max(64))?
        .iter()
        .map(|w| w.constant)
        .collect();
    let params = SearchParams {
        a: a.a,
        top_fraction: (a.top.max(1) as f64 / stats.count as f64).min(1.0),
        sample: Some(a.sample),
        waldspurger: Some(constants),
    };
    let search = search_large(&res, a.x, &lvals, &params)?;
    let lemma1 = lemma1_u
        .iter()
        .filter(|&&u| u <= a.x)
        .map(|&u| charsum_lemma1(u, a.x, res.parity()))
        .collect::<Result<Vec<_>, _>>()?;
    let report = ResonanceReport {
        params: res.params(),
        cal_r: stats.cal_r,
        moment2: stats.moment2,
        moment6: stats.moment6,
        diagonal_main: stats.diagonal_main,
        shift: Shift {
            predicted: predicted_shift(&res, &forms[0])?,
            observed: search.observed_shift,
        },
        top: search.top,
        lemma1,
        regime: res.regime(),
        bits: a.lvalue_bits,
        count: stats.count,
        holder: stats.holder,
        summary: search.summary,
    };
    let text = match a.format {
        Format::Json => to_json(&report),
        Format::Csv => report.to_csv(),
    };
    emit_text(&text, g.out.as_deref())
}
