//! Monte Carlo survival curves and decay-rate regression.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NeutronError, Result};
use crate::sim::{absorption_time, particle_rng, InitLaw, Neutron};

/// Normal quantile for two-sided 95% intervals.
const Z95: f64 = 1.959_963_984_540_054;

pub const MIN_PARTICLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    /// Survivor counts; empty for curves not built from particles.
    pub survivors: Vec<u64>,
    /// Number of particles, 0 when unknown.
    pub particles: u64,
    /// Wilson 95% interval.
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub warnings: Vec<String>,
}

impl SurvivalCurve {
    /// A curve given by exact values, e.g. from a closed form.
    pub fn from_values(times: Vec<f64>, survival: Vec<f64>) -> Result<Self> {
        if times.len() != survival.len() {
            return Err(NeutronError::InvalidArgument("times and values differ in length".into()));
        }
        Ok(Self {
            ci_lo: survival.clone(),
            ci_hi: survival.clone(),
            times,
            survival,
            survivors: vec![],
            particles: 0,
            warnings: vec![],
        })
    }
}

fn wilson(k: u64, n: u64) -> (f64, f64) {
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(NeutronError::InvalidArgument("time grid must be non-empty, finite and non-negative".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(NeutronError::InvalidArgument("time grid must be increasing".into()));
    }
    Ok(())
}

/// Absorption times of `n` independent particles (`∞` past `until`), in
/// particle order whatever the number of worker threads.
pub fn absorption_times(neutron: &Neutron, init: &InitLaw, n: usize, until: f64, seed: u64) -> Result<Vec<f64>> {
    init.check(&neutron.region)?;
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = particle_rng(seed, i);
            let s = init.sample(&neutron.region, &mut rng);
            absorption_time(neutron, s, until, &mut rng).unwrap_or(f64::INFINITY)
        })
        .collect())
}

pub fn estimate_survival_curve(
    neutron: &Neutron,
    init: &InitLaw,
    n: usize,
    t_grid: &[f64],
    seed: u64,
) -> Result<SurvivalCurve> {
    if n < MIN_PARTICLES {
        return Err(NeutronError::InvalidArgument(format!("need at least {MIN_PARTICLES} particles, got {n}")));
    }
    check_grid(t_grid)?;
    let horizon = *t_grid.last().expect("non-empty");
    let mut taus = absorption_times(neutron, init, n, horizon, seed)?;
    taus.sort_by(f64::total_cmp);
    let mut survivors = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let dead = taus.partition_point(|&tau| tau <= t);
        survivors.push((n - dead) as u64);
    }
    let survival: Vec<f64> = survivors.iter().map(|&k| k as f64 / n as f64).collect();
    let (ci_lo, ci_hi) = survivors.iter().map(|&k| wilson(k, n as u64)).unzip();
    let mut warnings = vec![];
    if survivors[0] == 0 {
        warnings.push(format!("all particles absorbed before t = {}", t_grid[0]));
    }
    Ok(SurvivalCurve { times: t_grid.to_vec(), survival, survivors, particles: n as u64, ci_lo, ci_hi, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub window: [f64; 2],
    pub rate: f64,
    pub stderr: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambda0Estimate {
    pub rate: f64,
    pub stderr: f64,
    pub window: [f64; 2],
    pub points: usize,
    /// Fits on the window shifted by -1/4, +1/4 and +1/2 of its width,
    /// where those fit inside the data.
    pub shifted: Vec<RateFit>,
}

pub const MIN_SURVIVORS: u64 = 50;

/// Least-squares slope of `-log S(t)` over `[t_a, t_b]`.
///
/// With particle counts the standard error propagates the multinomial
/// covariance `Cov(log Ŝ_i, log Ŝ_j) ≈ (1/S_i - 1)/N` (`t_i ≤ t_j`); otherwise it
/// is the residual standard error of the regression.
pub fn estimate_lambda0(curve: &SurvivalCurve, window: [f64; 2]) -> Result<Lambda0Estimate> {
    let main = fit_window(curve, window)?;
    let width = window[1] - window[0];
    let shifted = [-0.25, 0.25, 0.5]
        .iter()
        .filter_map(|f| fit_window(curve, [window[0] + f * width, window[1] + f * width]).ok())
        .collect();
    Ok(Lambda0Estimate { rate: main.rate, stderr: main.stderr, window, points: main.points, shifted })
}

fn fit_window(curve: &SurvivalCurve, window: [f64; 2]) -> Result<RateFit> {
    let [ta, tb] = window;
    let (first, last) = (curve.times[0], *curve.times.last().unwrap_or(&f64::NAN));
    if !(ta < tb) || ta < first - 1e-12 || tb > last + 1e-12 {
        return Err(NeutronError::InvalidArgument(format!(
            "window [{ta}, {tb}] outside the curve support [{first}, {last}]"
        )));
    }
    let idx: Vec<usize> =
        (0..curve.times.len()).filter(|&i| curve.times[i] >= ta - 1e-12 && curve.times[i] <= tb + 1e-12).collect();
    if idx.len() < 4 {
        return Err(NeutronError::InvalidArgument(format!("only {} grid points in window, need 4", idx.len())));
    }
    let counted = curve.particles > 0 && !curve.survivors.is_empty();
    if counted {
        let k = curve.survivors[*idx.last().expect("non-empty")];
        if k < MIN_SURVIVORS {
            return Err(NeutronError::Precondition(format!("{k} survivors at t = {tb}, need {MIN_SURVIVORS}")));
        }
    }
    if idx.iter().any(|&i| !(curve.survival[i] > 0.0)) {
        return Err(NeutronError::Precondition("zero survival inside the window".into()));
    }
    let t: Vec<f64> = idx.iter().map(|&i| curve.times[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| curve.survival[i].ln()).collect();
    let m = t.len() as f64;
    let tbar = t.iter().sum::<f64>() / m;
    let ybar = y.iter().sum::<f64>() / m;
    let sxx: f64 = t.iter().map(|ti| (ti - tbar).powi(2)).sum();
    let w: Vec<f64> = t.iter().map(|ti| (ti - tbar) / sxx).collect();
    let slope: f64 = w.iter().zip(&y).map(|(wi, yi)| wi * (yi - ybar)).sum();
    let stderr = if counted {
        let n = curve.particles as f64;
        let s: Vec<f64> = idx.iter().map(|&i| curve.survival[i]).collect();
        let mut var = 0.0;
        for i in 0..t.len() {
            for j in 0..t.len() {
                let early = i.min(j);
                var += w[i] * w[j] * (1.0 / s[early] - 1.0) / n;
            }
        }
        var.max(0.0).sqrt()
    } else {
        let rss: f64 = t.iter().zip(&y).map(|(ti, yi)| (yi - ybar - slope * (ti - tbar)).powi(2)).sum();
        (rss / (m - 2.0) / sxx).sqrt()
    };
    Ok(RateFit { window, rate: -slope, stderr, points: idx.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_slope() {
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.25).collect();
        let values = times.iter().map(|t| (-0.7 * t).exp()).collect();
        let c = SurvivalCurve::from_values(times, values).unwrap();
        let e = estimate_lambda0(&c, [2.0, 6.0]).unwrap();
        assert!((e.rate - 0.7).abs() < 1e-12);
        assert!(e.stderr < 1e-12);
        assert_eq!(e.shifted.len(), 3);
    }

    #[test]
    fn window_checks() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let values = times.iter().map(|t| (-0.5 * t).exp()).collect();
        let c = SurvivalCurve::from_values(times, values).unwrap();
        assert!(estimate_lambda0(&c, [2.0, 4.0]).is_err());
        assert!(estimate_lambda0(&c, [2.0, 12.0]).is_err());
        assert!(estimate_lambda0(&c, [4.0, 2.0]).is_err());
        assert!(estimate_lambda0(&c, [2.0, 5.0]).is_ok());
    }

    #[test]
    fn wilson_interval_brackets() {
        let (lo, hi) = wilson(500, 1000);
        assert!(lo < 0.5 && hi > 0.5 && (hi - lo) < 0.07);
        let (lo, hi) = wilson(1000, 1000);
        assert!(lo < 1.0 && hi == 1.0);
    }
}
