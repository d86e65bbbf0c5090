use serde::Serialize;
use serde_json::{json, Value};

use mfres::arith::{enumerate_discriminants, is_square, ResidueFilter, Sign};
use mfres::halfint::{plus_allowed, shimura_check};
use mfres::modforms::dim_cusp_forms;
use mfres::resonance::{build_resonator, moments, predicted_shift, ResonatorOverrides};

use crate::cache::CacheManifest;
use crate::commands::{charsum_report, dseries_report, open_cache, plus_basis, plus_prec_floor, waldspurger_constants};
use crate::{emit_text, to_json, CliError, Global, Suite, VerifyArgs};

#[derive(Serialize)]
struct Check {
    name: String,
    pass: bool,
    detail: Value,
}

#[derive(Serialize)]
struct SuiteReport {
    suite: &'static str,
    pass: bool,
    checks: Vec<Check>,
}

#[derive(Serialize)]
struct VerifyReport {
    pass: bool,
    first_failure: Option<String>,
    bits: u32,
    suites: Vec<SuiteReport>,
}

fn suite(name: &'static str, checks: Vec<Check>) -> SuiteReport {
    SuiteReport {
        suite: name,
        pass: checks.iter().all(|c| c.pass),
        checks,
    }
}

fn check(name: impl Into<String>, pass: bool, detail: Value) -> Check {
    Check {
        name: name.into(),
        pass,
        detail,
    }
}

fn plus(cache: &CacheManifest, k: u32, bits: u32) -> Result<SuiteReport, CliError> {
    let prec = 2000.max(plus_prec_floor(k) + 1);
    let (basis, _) = plus_basis(cache, k, prec, bits)?;
    let expected = dim_cusp_forms(2 * k);
    let mut checks = vec![check(
        "dimension",
        basis.dimension() == expected,
        json!({"dimension": basis.dimension(), "expected": expected}),
    )];
    for (nu, g) in basis.forms.iter().enumerate() {
        let first = g.first_nonzero();
        let lead = first.map(|n| g.coeff_f64(n));
        checks.push(check(
            format!("normalized[{}]", nu + 1),
            lead == Some(1.0),
            json!({"first_index": first, "coefficient": lead}),
        ));
        let stray = (1..g.prec()).find(|&n| g.is_nonzero(n) && !plus_allowed(k, n));
        checks.push(check(
            format!("plus_residues[{}]", nu + 1),
            stray.is_none(),
            json!({"first_violation": stray}),
        ));
        let ds = enumerate_discriminants(0, 30, Sign::for_parity(mfres::arith::Parity::of(k)), ResidueFilter::All)?;
        for d in ds.into_iter().take(5) {
            let n_max = mfres::arith::isqrt((g.prec() as u64 - 1) / d.abs());
            let r = shimura_check(g, &basis.lifts[nu], d, n_max)?;
            checks.push(check(
                format!("shimura[{}][D={}]", nu + 1, d.value()),
                r.pass,
                serde_json::to_value(&r).expect("report serializes"),
            ));
        }
    }
    Ok(suite("plus", checks))
}

fn waldspurger(cache: &CacheManifest, k: u32, bits: u32) -> Result<SuiteReport, CliError> {
    let fits = waldspurger_constants(cache, k, bits)?;
    let checks = fits
        .iter()
        .enumerate()
        .map(|(nu, f)| {
            check(
                format!("proportionality[{}]", nu + 1),
                f.spread < 1e-6 && f.zero_consistent,
                serde_json::to_value(f).expect("fit serializes"),
            )
        })
        .collect();
    Ok(suite("waldspurger", checks))
}

fn dseries(cache: &CacheManifest, k: u32, bits: u32) -> Result<SuiteReport, CliError> {
    let r = dseries_report(cache, k, k as f64, 1, 20_000, 2_000, bits)?;
    Ok(suite(
        "dseries",
        vec![check("triple_agreement", r.pass, serde_json::to_value(&r).expect("report serializes"))],
    ))
}

fn resonance(cache: &CacheManifest, k: u32, x: u64, bits: u32) -> Result<SuiteReport, CliError> {
    let forms = cache.eigenforms(2 * k, 1000, bits.max(64))?.0;
    let ov = ResonatorOverrides {
        n_max: Some(1000),
        window: Some((11.0, 53.0)),
        ..Default::default()
    };
    let res = build_resonator(x, &forms[0], &ov)?;
    let st = moments(&res, x)?;
    let ratio = st.moment2 / st.diagonal_main;
    let bound = 2.0 / (std::f64::consts::PI * std::f64::consts::PI) * x as f64 * st.cal_r * 1.25;
    let shift = predicted_shift(&res, &forms[0])?;
    let stats = serde_json::to_value(&st).expect("stats serialize");
    Ok(suite(
        "resonance",
        vec![
            check("diagonal", (0.9..=1.1).contains(&ratio), json!({"ratio": ratio, "stats": stats})),
            check("holder", st.holder, json!({"moment2": st.moment2, "moment6": st.moment6, "count": st.count})),
            check("moment_bound", st.moment2 <= bound, json!({"moment2": st.moment2, "bound": bound})),
            check("shift_positive", shift > 1.0, json!({"predicted": shift})),
        ],
    ))
}

fn charsum(u: u64, x: u64, k: u32) -> Result<SuiteReport, CliError> {
    let r = charsum_report(u, x, k)?;
    let pass = if is_square(u) {
        r.relative_error.is_some_and(|e| e <= 0.02)
    } else {
        (r.brute as f64).abs() < r.bound
    };
    Ok(suite(
        "charsum",
        vec![check(format!("lemma1[u={u}]"), pass, serde_json::to_value(&r).expect("report serializes"))],
    ))
}

pub fn run(g: &Global, a: &VerifyArgs) -> Result<(), CliError> {
    let needs_cache = !matches!(a.suite, Suite::Charsum);
    let cache = if needs_cache {
        Some(open_cache(g).map_err(|e| match e {
            CliError::Env(m) => CliError::Env(format!("cannot build cache: {m}")),
            other => other,
        })?)
    } else {
        None
    };
    let c = || cache.as_ref().expect("cache opened for this suite");
    let mut suites = Vec::new();
    let all = a.suite == Suite::All;
    if all || a.suite == Suite::Plus {
        suites.push(plus(c(), a.k, g.bits)?);
    }
    if all || a.suite == Suite::Waldspurger {
        suites.push(waldspurger(c(), a.k, g.bits)?);
    }
    if all || a.suite == Suite::Dseries {
        suites.push(dseries(c(), a.k, g.bits)?);
    }
    if all || a.suite == Suite::Resonance {
        suites.push(resonance(c(), a.k, a.x, g.bits)?);
    }
    if all || a.suite == Suite::Charsum {
        suites.push(charsum(a.u, a.x, a.k)?);
    }
    let first_failure = suites.iter().find_map(|s| {
        s.checks
            .iter()
            .find(|c| !c.pass)
            .map(|c| format!("{}/{}", s.suite, c.name))
    });
    let report = VerifyReport {
        pass: first_failure.is_none(),
        first_failure: first_failure.clone(),
        bits: g.bits,
        suites,
    };
    emit_text(&to_json(&report), g.out.as_deref())?;
    match first_failure {
        None => Ok(()),
        Some(name) => Err(CliError::Check(format!("check failed: {name}"))),
    }
}
