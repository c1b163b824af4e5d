//! `neutron`.

use qsdlab_neutron::{
    estimate_lambda0, estimate_qsd, estimate_survival_curve, verify_transport_density_bound, Neutron, NeutronError,
    QsdHistogram, QsdMode,
};
use serde_json::json;

use crate::config::NeutronConfig;
use crate::error::Result;
use crate::output::{num, OutDir, RunRecord};

/// Pass fraction required of the density-bound table.
pub const BOUND_PASS: f64 = 0.99;

fn mode_name(m: QsdMode) -> &'static str {
    match m {
        QsdMode::Naive => "naive",
        QsdMode::FlemingViot => "fleming_viot",
    }
}

fn histogram_rows(h: &QsdHistogram) -> Vec<Vec<String>> {
    (0..h.counts.len())
        .map(|c| {
            let b = h.cell_bounds(c);
            let mut r = vec![c.to_string()];
            r.extend(b.iter().map(|&v| num(v)));
            r.push(h.counts[c].to_string());
            r.push(num(h.mass[c]));
            r
        })
        .collect()
}

pub fn run(cfg: &NeutronConfig, seed_override: Option<u64>, out: &mut OutDir) -> Result<RunRecord> {
    let seed = seed_override.or(cfg.seed).unwrap_or(0);
    let neutron = Neutron::new(&cfg.spec)?;
    let model = cfg.name.clone().unwrap_or_else(|| format!("neutron(lambda={})", num(cfg.spec.lambda)));
    let mut rec = RunRecord { model, seed: Some(seed), ..Default::default() };
    let mut summary = json!({ "spec": cfg.spec, "N": cfg.n, "seed": seed, "init": cfg.init });

    let grid = cfg.times.points()?;
    let curve = estimate_survival_curve(&neutron, &cfg.init, cfg.n, &grid, seed)?;
    let rows = (0..grid.len()).map(|i| {
        vec![
            num(curve.times[i]),
            curve.survivors[i].to_string(),
            num(curve.survival[i]),
            num(curve.ci_lo[i]),
            num(curve.ci_hi[i]),
        ]
    });
    out.csv("survival.csv", &["t", "survivors", "survival", "ci_lo", "ci_hi"], rows)?;
    summary["warnings"] = json!(curve.warnings);

    if let Some(w) = cfg.window {
        match estimate_lambda0(&curve, w) {
            Ok(e) => {
                rec.summary.lambda0 = Some(e.rate);
                rec.verdicts.push("LAMBDA0".into());
                out.json("lambda0.json", &e)?;
                summary["lambda0"] = json!(e);
            }
            Err(NeutronError::Precondition(msg)) => {
                rec.verdicts.push("LAMBDA0-UNAVAILABLE".into());
                summary["lambda0_unavailable"] = json!(msg);
            }
            Err(e) => return Err(e.into()),
        }
    }

    if let Some(q) = &cfg.qsd {
        let n = q.n.unwrap_or(cfg.n);
        let mut hists = vec![];
        for &mode in &q.modes {
            let h = estimate_qsd(&neutron, &cfg.init, q.t_star, n, mode, q.bins, seed)?;
            let name = mode_name(mode);
            out.csv(
                &format!("qsd_{name}.csv"),
                &["cell", "x_lo", "x_hi", "y_lo", "y_hi", "theta_lo", "theta_hi", "count", "mass"],
                histogram_rows(&h),
            )?;
            out.json(&format!("qsd_{name}.json"), &h)?;
            hists.push(h);
        }
        if let [a, b] = hists.as_slice() {
            summary["qsd_tv"] = json!(a.tv_distance(b)?);
        }
    }

    if let Some(b) = &cfg.bound {
        let n = b.n.unwrap_or(cfg.n);
        let table = verify_transport_density_bound(&neutron, b.x, b.u, b.t, b.cells, n, seed)?;
        let rows = table.cells.iter().enumerate().map(|(k, c)| {
            vec![
                k.to_string(),
                c.ix.to_string(),
                c.iy.to_string(),
                c.arc.to_string(),
                num(c.empirical),
                num(c.sigma),
                num(c.rhs),
                num(c.margin),
                c.pass.to_string(),
            ]
        });
        out.csv("bound.csv", &["cell", "ix", "iy", "arc", "empirical", "sigma", "rhs", "margin", "pass"], rows)?;
        summary["bound_pass_fraction"] = json!(table.pass_fraction);
        if table.pass_fraction >= BOUND_PASS {
            rec.verdicts.push("BOUND-PASS".into());
        } else {
            rec.verdicts.push("BOUND-FAIL".into());
            rec.exit_code = 2;
        }
    }
    out.json("neutron.json", &summary)?;
    Ok(rec)
}
