//! `solve`, `certify`, `bd` and `multibd`.

use qsdlab_core::criteria::SurvivalProfile;
use qsdlab_core::models::MultiMode;
use qsdlab_core::{
    build_bd, build_multibd_cooperative, build_multibd_mutation, certify, check_weak_cooperation, domination_rates,
    explicit_bound, s_series, solve_spectral, spectrum_report, tv_distance, BDSpec, Certificate, CertifyOptions,
    Distribution, Generator, QsdError, RateSeq, SeriesReport, SeriesVerdict, Triple,
};
use rayon::prelude::*;

use crate::config::{ChainConfig, Command, DEFAULT_MAX_STARTS};
use crate::error::{CliError, Result};
use crate::output::{finite, num, OutDir, RunRecord};

/// Verdict label of a negative mathematical outcome.
pub fn verdict_of(e: &QsdError) -> &'static str {
    match e {
        QsdError::A1Fails { .. } => "A1-FAIL",
        QsdError::NotUnique(_) => "NOT-UNIQUE",
        QsdError::ExtendHorizon(_) => "EXTEND-HORIZON",
        _ => "ERROR",
    }
}

fn series_label(prefix: &str, r: &SeriesReport<f64>) -> String {
    let v = match r.verdict {
        SeriesVerdict::Converged => "CONVERGED",
        SeriesVerdict::Diverging => "DIVERGING",
        SeriesVerdict::Inconclusive => "INCONCLUSIVE",
    };
    format!("{prefix}-{v}")
}

fn model_of(cfg: &ChainConfig, command: Command) -> Result<(String, Generator)> {
    let given = [cfg.generator.is_some(), cfg.bd.is_some(), cfg.multibd.is_some()].iter().filter(|&&b| b).count();
    if given != 1 {
        return Err(CliError::Usage(
            "the configuration needs exactly one of \"generator\", \"bd\", \"multibd\"".into(),
        ));
    }
    let (label, gen) = match (command, &cfg.generator, &cfg.bd, &cfg.multibd) {
        (Command::Bd, _, None, _) => return Err(CliError::Usage("`bd` needs a \"bd\" model".into())),
        (Command::Multibd, _, _, None) => return Err(CliError::Usage("`multibd` needs a \"multibd\" model".into())),
        (_, Some(g), _, _) => (format!("generator(n={})", g.n()), g.clone()),
        (_, _, Some(s), _) => (format!("bd(N={})", s.n), build_bd(s)?),
        (_, _, _, Some(s)) => {
            let g = match s.mode {
                MultiMode::Mutation => build_multibd_mutation(s)?,
                MultiMode::Cooperative => build_multibd_cooperative(s)?,
            };
            let mode = if s.mode == MultiMode::Mutation { "mutation" } else { "cooperative" };
            (format!("multibd({mode}, d={}, cap={})", s.types(), s.cap), g)
        }
        _ => unreachable!("exactly one model is present"),
    };
    Ok((cfg.name.clone().unwrap_or(label), gen))
}

/// Runs a chain command; criteria failures end up in the record with exit code 2.
pub fn run(cfg: &ChainConfig, command: Command, tol: f64, out: &mut OutDir) -> Result<RunRecord> {
    let (model, gen) = model_of(cfg, command)?;
    let mut rec = RunRecord { model, ..Default::default() };
    match run_inner(cfg, command, tol, &gen, out, &mut rec) {
        Err(CliError::Core(e)) if e.is_criteria_failure() => {
            rec.verdicts.push(verdict_of(&e).to_string());
            rec.exit_code = 2;
            out.json("failure.json", &serde_json::json!({ "verdict": verdict_of(&e), "message": e.to_string() }))?;
            Ok(rec)
        }
        Err(e) => Err(e),
        Ok(()) => Ok(rec),
    }
}

fn run_inner(
    cfg: &ChainConfig,
    command: Command,
    tol: f64,
    gen: &Generator,
    out: &mut OutDir,
    rec: &mut RunRecord,
) -> Result<()> {
    if command == Command::Bd {
        // The series does not depend on the truncation, so it is reported
        // even when certification fails.
        let spec = cfg.bd.as_ref().expect("checked by model_of");
        let series = s_series(spec, cfg.series.k_max, cfg.series.z)?;
        rec.verdicts.push(series_label("S", &series));
        out.json("series.json", &series)?;
    }
    let triple = solve_spectral(gen, tol)?;
    rec.summary.lambda0 = Some(triple.lambda0);
    out.json("triple.json", &triple)?;
    if command == Command::Solve {
        rec.verdicts.push("SOLVED".into());
        return Ok(());
    }
    let opts =
        CertifyOptions { t0: cfg.certify.t0, t_max: cfg.certify.t_max, grid_divisions: cfg.certify.grid_divisions };
    let cert = certify(gen, &triple, &opts)?;
    rec.summary.c1 = Some(cert.c1);
    rec.summary.c2 = Some(cert.c2);
    rec.summary.gamma_bound = finite(cert.gamma_bound);
    out.json("certificate.json", &cert)?;
    rec.verdicts.insert(0, "CERTIFIED".into());

    let slack = tv_table(gen, &triple, &cert, cfg, out)?;
    rec.summary.max_tv_slack = Some(slack);
    if slack > 1e-9 {
        rec.verdicts.push("BOUND-VIOLATED".into());
        rec.exit_code = 2;
    }
    ratio_table(gen, &triple, &cert, cfg, out)?;
    if gen.n() <= 512 && cert.gamma_bound.is_finite() {
        let sp = spectrum_report(gen, &triple, cert.gamma_bound)?;
        rec.verdicts.push(if sp.trichotomy_holds { "TRICHOTOMY-OK" } else { "TRICHOTOMY-FAIL" }.into());
        out.json("spectrum.json", &sp)?;
    }
    if command == Command::Multibd {
        let spec = cfg.multibd.as_ref().expect("checked by model_of");
        if spec.mode == MultiMode::Cooperative {
            let w = check_weak_cooperation(spec)?;
            rec.verdicts.push(if w.holds { "WEAK-COOP-OK" } else { "WEAK-COOP-FAIL" }.into());
            out.json("weak_cooperation.json", &w)?;
        }
        let (b, d) = domination_rates(spec)?;
        let dom = BDSpec::new(b, d, RateSeq::Const(0.0), 1);
        let series = s_series(&dom, cfg.series.k_max, cfg.series.z)?;
        rec.verdicts.push(series_label("DOM-S", &series));
        out.json("domination_series.json", &serde_json::json!({ "spec": dom, "series": series }))?;
    }
    Ok(())
}

fn starts(cfg: &ChainConfig, n: usize) -> Result<Vec<usize>> {
    match &cfg.starts {
        Some(s) => {
            if let Some(&bad) = s.iter().find(|&&x| x >= n) {
                return Err(CliError::Usage(format!("start state {bad} out of range for {n} states")));
            }
            Ok(s.clone())
        }
        None if n <= DEFAULT_MAX_STARTS => Ok((0..n).collect()),
        None => Ok((0..DEFAULT_MAX_STARTS).map(|k| k * (n - 1) / (DEFAULT_MAX_STARTS - 1)).collect()),
    }
}

/// `tv_vs_bound.csv`; returns `max(TV − bound)`.
fn tv_table(gen: &Generator, triple: &Triple, cert: &Certificate, cfg: &ChainConfig, out: &mut OutDir) -> Result<f64> {
    let times = cfg.times.points()?;
    let step = cfg.times.step;
    let alpha = triple.alpha.weights();
    let bounds: Vec<f64> = times.iter().map(|&t| explicit_bound(cert, t)).collect::<Result<_, _>>()?;
    let starts = starts(cfg, gen.n())?;
    let per_start: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&x| {
            let mut v = Distribution::dirac(gen.n(), x).into_weights();
            let mut tv = Vec::with_capacity(times.len());
            for k in 0..times.len() {
                if k > 0 {
                    v = gen.propagate_left(&v, step)?.0;
                }
                tv.push(tv_distance(&v, alpha)?);
            }
            Ok(tv)
        })
        .collect::<Result<_, QsdError>>()?;
    let mut slack = f64::NEG_INFINITY;
    let mut rows = vec![];
    for (x, tvs) in starts.iter().zip(&per_start) {
        for ((t, tv), b) in times.iter().zip(tvs).zip(&bounds) {
            slack = slack.max(tv - b);
            rows.push(vec![num(*t), x.to_string(), num(*tv), num(*b), num(tv - b)]);
        }
    }
    out.csv("tv_vs_bound.csv", &["t", "start", "tv", "bound", "slack"], rows)?;
    Ok(slack)
}

/// `c2_ratio.csv`: `P_μ(t < τ) / max_x P_x(t < τ)` for `μ = ν` and `μ = α`.
fn ratio_table(
    gen: &Generator,
    triple: &Triple,
    cert: &Certificate,
    cfg: &ChainConfig,
    out: &mut OutDir,
) -> Result<()> {
    let step = cert.t0 / cfg.certify.grid_divisions as f64;
    let profile = SurvivalProfile::build(gen, triple, cert.t_max, step)?;
    let nu = profile.ratio_curve(cert.nu.weights());
    let alpha = profile.ratio_curve(triple.alpha.weights());
    let rows = nu.iter().zip(&alpha).map(|((t, a), (_, b))| vec![num(*t), num(*a), num(*b)]);
    out.csv("c2_ratio.csv", &["t", "ratio_nu", "ratio_alpha"], rows)
}
