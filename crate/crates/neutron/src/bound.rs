//! Free-space lower bound on the law of `(X_t, V_t)`, and explicit
//! boundary-cone constants for disks.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NeutronError, Result};
use crate::geometry::{Domain, Point};
use crate::qsd::states_at;
use crate::sim::{particle_rng, random_direction, InitLaw, Neutron};

/// Lower bound density of `X_t` at distance `r` from the start, per unit
/// area and per unit of (probability) direction mass:
/// `λ² e^{-λt} / (4π t) · (t - r)² / (t + r)` on `r < t`.
pub fn transport_density_lower_bound(lambda: f64, t: f64, r: f64) -> f64 {
    if r >= t {
        return 0.0;
    }
    lambda * lambda * (-lambda * t).exp() / (4.0 * PI * t) * (t - r).powi(2) / (t + r)
}

/// Cells: `nx × ny` squares over `[x - t, x + t]²` times `arcs` direction arcs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellPartition {
    pub nx: usize,
    pub ny: usize,
    pub arcs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCell {
    pub ix: usize,
    pub iy: usize,
    pub arc: usize,
    /// `[x_lo, x_hi, y_lo, y_hi]`.
    pub rect: [f64; 4],
    /// `[θ_lo, θ_hi]`.
    pub angles: [f64; 2],
    pub empirical: f64,
    pub sigma: f64,
    pub rhs: f64,
    /// `empirical + 3σ - rhs`.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    pub x: Point,
    pub u: Point,
    pub t: f64,
    pub particles: u64,
    pub cells: Vec<BoundCell>,
    pub pass_fraction: f64,
}

/// Midpoint points per cell side used to integrate the bound.
pub const QUADRATURE: usize = 32;

/// Integral of [`transport_density_lower_bound`] around `x` over `rect`.
pub fn cell_integral(lambda: f64, t: f64, x: Point, rect: [f64; 4]) -> f64 {
    let (hx, hy) = ((rect[1] - rect[0]) / QUADRATURE as f64, (rect[3] - rect[2]) / QUADRATURE as f64);
    let mut acc = 0.0;
    for i in 0..QUADRATURE {
        for j in 0..QUADRATURE {
            let zx = rect[0] + (i as f64 + 0.5) * hx - x[0];
            let zy = rect[2] + (j as f64 + 0.5) * hy - x[1];
            acc += transport_density_lower_bound(lambda, t, (zx * zx + zy * zy).sqrt());
        }
    }
    acc * hx * hy
}

/// Compares, cell by cell, the Monte Carlo probability of `(X_t, V_t)` from
/// `(x, u)` against the integrated bound; a cell passes when
/// `empirical + 3σ ≥ bound`, with `σ` the binomial standard error at
/// `max(empirical, bound)`.
pub fn verify_transport_density_bound(
    neutron: &Neutron,
    x: Point,
    u: Point,
    t: f64,
    cells: CellPartition,
    n: usize,
    seed: u64,
) -> Result<BoundTable> {
    if !matches!(neutron.region.domain(), Domain::Disk { .. }) {
        return Err(NeutronError::InvalidArgument("the density bound is checked on disks".into()));
    }
    if !(t > 0.0) || cells.nx == 0 || cells.ny == 0 || cells.arcs == 0 || n == 0 {
        return Err(NeutronError::InvalidArgument("need t > 0, non-empty cells and particles".into()));
    }
    let dist = neutron.region.distance_to_boundary(x);
    if !(dist > t) {
        return Err(NeutronError::Precondition(format!("d(x, ∂D) = {dist} must exceed t = {t}")));
    }
    let states = states_at(neutron, &InitLaw::Dirac { x, u }, t, n, seed)?;
    let (nx, ny, na) = (cells.nx, cells.ny, cells.arcs);
    let mut counts = vec![0u64; nx * ny * na];
    let (x0, y0) = (x[0] - t, x[1] - t);
    let (dx, dy, da) = (2.0 * t / nx as f64, 2.0 * t / ny as f64, TAU / na as f64);
    for s in states.iter().flatten() {
        let fx = ((s.x[0] - x0) / dx).floor();
        let fy = ((s.x[1] - y0) / dy).floor();
        if fx < 0.0 || fy < 0.0 || fx >= nx as f64 || fy >= ny as f64 {
            continue;
        }
        let arc = ((s.angle() / da).floor() as usize).min(na - 1);
        counts[(fx as usize * ny + fy as usize) * na + arc] += 1;
    }
    let nf = n as f64;
    let mut out = Vec::with_capacity(counts.len());
    let mut spatial = vec![0.0; nx * ny];
    for ix in 0..nx {
        for iy in 0..ny {
            let rect = [x0 + ix as f64 * dx, x0 + (ix + 1) as f64 * dx, y0 + iy as f64 * dy, y0 + (iy + 1) as f64 * dy];
            spatial[ix * ny + iy] = cell_integral(neutron.lambda(), t, x, rect);
        }
    }
    for ix in 0..nx {
        for iy in 0..ny {
            let rect = [x0 + ix as f64 * dx, x0 + (ix + 1) as f64 * dx, y0 + iy as f64 * dy, y0 + (iy + 1) as f64 * dy];
            for arc in 0..na {
                let p = counts[(ix * ny + iy) * na + arc] as f64 / nf;
                let rhs = spatial[ix * ny + iy] / na as f64;
                // Binomial error at the larger of estimate and bound, so empty
                // cells are not judged with a zero-width interval.
                let q = p.max(rhs);
                let sigma = (q * (1.0 - q) / nf).sqrt();
                let margin = p + 3.0 * sigma - rhs;
                out.push(BoundCell {
                    ix,
                    iy,
                    arc,
                    rect,
                    angles: [arc as f64 * da, (arc + 1) as f64 * da],
                    empirical: p,
                    sigma,
                    rhs,
                    margin,
                    pass: margin >= 0.0,
                });
            }
        }
    }
    let pass_fraction = out.iter().filter(|c| c.pass).count() as f64 / out.len() as f64;
    Ok(BoundTable { x, u, t, particles: n as u64, cells: out, pass_fraction })
}

/// Constants of the boundary-cone condition: from every `x` within `ε` of
/// the boundary, every direction in `K_x` (within `acos(cone_cos)` of the
/// inward normal) stays inside `D_ε` for flight lengths in `[s_eps, t_eps]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionBParams {
    pub epsilon: f64,
    pub s_eps: f64,
    pub t_eps: f64,
    /// Probability mass of `K_x` under the uniform direction law.
    pub sigma_lower: f64,
    pub cone_cos: f64,
}

/// Explicit constants for a disk of the given radius.
///
/// With `e = ε/R` and flight lengths `τε`, the worst cases are points on
/// `∂D` and on `∂D_ε`; they need `τ ∈ (1, 2(1-e)/e)` and
/// `cos φ > max(1/τ + (τ²-1)e/(2τ), τe/(2(1-e)))`.
pub fn disk_assumption_b_params(radius: f64, epsilon: f64) -> Result<AssumptionBParams> {
    if !(radius > 0.0 && epsilon > 0.0 && epsilon < radius / 2.0) {
        return Err(NeutronError::InvalidArgument(format!("need 0 < ε < R/2, got ε = {epsilon}, R = {radius}")));
    }
    let e = epsilon / radius;
    let tau_max = 2.0 * (1.0 - e) / e;
    let (a, b) = (1.0 + (tau_max - 1.0) / 3.0, 1.0 + 2.0 * (tau_max - 1.0) / 3.0);
    let need = |tau: f64| (1.0 / tau + (tau * tau - 1.0) * e / (2.0 * tau)).max(tau * e / (2.0 * (1.0 - e)));
    let cone_cos = need(a).max(need(b));
    Ok(AssumptionBParams {
        epsilon,
        s_eps: a * epsilon,
        t_eps: b * epsilon,
        sigma_lower: cone_cos.acos() / PI,
        cone_cos,
    })
}

/// Samples points of the boundary shell `D \ D_ε` and directions of `K_x`, and
/// checks that every sampled flight stays in `D_ε` over `[s_eps, t_eps]`
/// and does not touch `∂D` before.
pub fn check_disk_assumption_b(radius: f64, params: &AssumptionBParams, samples: usize, seed: u64) -> bool {
    let mut rng = particle_rng(seed, 0);
    let inner = radius - params.epsilon;
    let half = params.cone_cos.acos();
    (0..samples).all(|_| {
        let rho = inner + (radius - inner) * rng.random::<f64>();
        let dir = random_direction(&mut rng);
        let x = [rho * dir[0], rho * dir[1]];
        let normal = [-dir[0], -dir[1]];
        // Keep strictly inside the open cone.
        let phi = half * (2.0 * rng.random::<f64>() - 1.0) * (1.0 - 1e-9);
        let (c, s) = (phi.cos(), phi.sin());
        let u = [c * normal[0] - s * normal[1], s * normal[0] + c * normal[1]];
        let at = |s: f64| {
            let p = [x[0] + s * u[0], x[1] + s * u[1]];
            (p[0] * p[0] + p[1] * p[1]).sqrt()
        };
        let steps = 64;
        let deep = (0..=steps).all(|k| {
            let s = params.s_eps + (params.t_eps - params.s_eps) * k as f64 / steps as f64;
            at(s) < inner
        });
        let clear = (1..=steps).all(|k| at(params.s_eps * k as f64 / steps as f64) < radius);
        deep && clear
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_at_the_start_point() {
        let v = transport_density_lower_bound(1.0, 0.5, 0.0);
        assert!((v - (-0.5f64).exp() / (4.0 * PI)).abs() < 1e-15);
        assert_eq!(transport_density_lower_bound(1.0, 0.5, 0.5), 0.0);
        assert_eq!(transport_density_lower_bound(1.0, 0.5, 0.7), 0.0);
    }

    #[test]
    fn cell_integral_outside_ball_is_zero() {
        assert_eq!(cell_integral(1.0, 0.5, [0.0, 0.0], [0.4, 0.5, 0.4, 0.5]), 0.0);
        let inside = cell_integral(1.0, 0.5, [0.0, 0.0], [-0.05, 0.05, -0.05, 0.05]);
        let centre = transport_density_lower_bound(1.0, 0.5, 0.0) * 0.01;
        assert!(inside < centre && inside > 0.6 * centre);
    }

    #[test]
    fn disk_params_in_range() {
        let p = disk_assumption_b_params(1.0, 0.1).unwrap();
        assert!(0.0 < p.s_eps && p.s_eps < p.t_eps);
        assert!(p.sigma_lower > 0.0 && p.sigma_lower <= 1.0);
        assert!(check_disk_assumption_b(1.0, &p, 1000, 4));
        assert!(disk_assumption_b_params(1.0, 0.5).is_err());
        assert!(disk_assumption_b_params(1.0, 0.0).is_err());
    }
}
