//! Histograms of the conditioned law at a fixed time, from surviving
//! particles or from a Fleming-Viot cloud.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::f64::consts::TAU;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NeutronError, Result};
use crate::sim::{absorption_time, control_rng, particle_rng, InitLaw, Life, Neutron, PdmpState};

pub const MIN_QSD_PARTICLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QsdMode {
    Naive,
    FlemingViot,
}

/// Cells: `nx × ny` over the domain's bounding box, times `arcs` equal
/// direction arcs starting at angle 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bins {
    pub nx: usize,
    pub ny: usize,
    pub arcs: usize,
}

impl Bins {
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.arcs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QsdHistogram {
    pub mode: QsdMode,
    pub t_star: f64,
    pub bins: Bins,
    /// `[x_min, x_max, y_min, y_max]`.
    pub bbox: [f64; 4],
    /// Indexed by `(ix * ny + iy) * arcs + arc`.
    pub counts: Vec<u64>,
    pub mass: Vec<f64>,
    pub effective_sample_size: f64,
    /// Resampling events (Fleming-Viot only).
    pub restarts: u64,
}

impl QsdHistogram {
    pub fn cell_index(&self, ix: usize, iy: usize, arc: usize) -> usize {
        (ix * self.bins.ny + iy) * self.bins.arcs + arc
    }

    /// `[x_lo, x_hi, y_lo, y_hi, θ_lo, θ_hi]` of a cell.
    pub fn cell_bounds(&self, cell: usize) -> [f64; 6] {
        let arc = cell % self.bins.arcs;
        let iy = (cell / self.bins.arcs) % self.bins.ny;
        let ix = cell / (self.bins.arcs * self.bins.ny);
        let [x0, x1, y0, y1] = self.bbox;
        let (dx, dy) = ((x1 - x0) / self.bins.nx as f64, (y1 - y0) / self.bins.ny as f64);
        let da = TAU / self.bins.arcs as f64;
        [
            x0 + ix as f64 * dx,
            x0 + (ix + 1) as f64 * dx,
            y0 + iy as f64 * dy,
            y0 + (iy + 1) as f64 * dy,
            arc as f64 * da,
            (arc + 1) as f64 * da,
        ]
    }

    fn bin_of(&self, s: &PdmpState) -> usize {
        let [x0, x1, y0, y1] = self.bbox;
        let fx = ((s.x[0] - x0) / (x1 - x0) * self.bins.nx as f64).floor();
        let fy = ((s.x[1] - y0) / (y1 - y0) * self.bins.ny as f64).floor();
        let fa = (s.angle() / TAU * self.bins.arcs as f64).floor();
        let ix = (fx.max(0.0) as usize).min(self.bins.nx - 1);
        let iy = (fy.max(0.0) as usize).min(self.bins.ny - 1);
        let arc = (fa.max(0.0) as usize).min(self.bins.arcs - 1);
        self.cell_index(ix, iy, arc)
    }

    /// Total-mass distance `Σ |p - q|` between two histograms on the same cells.
    pub fn tv_distance(&self, other: &Self) -> Result<f64> {
        if self.bins != other.bins || self.bbox != other.bbox {
            return Err(NeutronError::InvalidArgument("histograms use different cells".into()));
        }
        Ok(self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).sum())
    }

    /// Merges cells into a coarser grid; each factor must divide the matching count.
    pub fn coarsen(&self, bins: Bins) -> Result<Self> {
        let b = self.bins;
        if bins.is_empty()
            || !b.nx.is_multiple_of(bins.nx)
            || !b.ny.is_multiple_of(bins.ny)
            || !b.arcs.is_multiple_of(bins.arcs)
        {
            return Err(NeutronError::InvalidArgument("coarse bins must divide the fine bins".into()));
        }
        let (fx, fy, fa) = (b.nx / bins.nx, b.ny / bins.ny, b.arcs / bins.arcs);
        let mut out = Self { bins, counts: vec![0; bins.len()], mass: vec![0.0; bins.len()], ..self.clone() };
        for ix in 0..b.nx {
            for iy in 0..b.ny {
                for a in 0..b.arcs {
                    let src = self.cell_index(ix, iy, a);
                    let dst = out.cell_index(ix / fx, iy / fy, a / fa);
                    out.counts[dst] += self.counts[src];
                }
            }
        }
        let total: u64 = out.counts.iter().sum();
        out.mass = out.counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(out)
    }
}

fn empty_histogram(neutron: &Neutron, mode: QsdMode, t_star: f64, bins: Bins) -> QsdHistogram {
    QsdHistogram {
        mode,
        t_star,
        bins,
        bbox: neutron.region.bounding_box(),
        counts: vec![0; bins.len()],
        mass: vec![0.0; bins.len()],
        effective_sample_size: 0.0,
        restarts: 0,
    }
}

fn fill(h: &mut QsdHistogram, states: &[PdmpState]) {
    for s in states {
        let c = h.bin_of(s);
        h.counts[c] += 1;
    }
    let total = states.len() as f64;
    h.mass = h.counts.iter().map(|&c| c as f64 / total).collect();
}

pub fn estimate_qsd(
    neutron: &Neutron,
    init: &InitLaw,
    t_star: f64,
    n: usize,
    mode: QsdMode,
    bins: Bins,
    seed: u64,
) -> Result<QsdHistogram> {
    init.check(&neutron.region)?;
    if n < MIN_QSD_PARTICLES {
        return Err(NeutronError::InvalidArgument(format!("need at least {MIN_QSD_PARTICLES} particles, got {n}")));
    }
    if bins.is_empty() {
        return Err(NeutronError::InvalidArgument("bins must be non-empty".into()));
    }
    if !(t_star >= 0.0 && t_star.is_finite()) {
        return Err(NeutronError::InvalidArgument("t_star must be finite and non-negative".into()));
    }
    let mut h = empty_histogram(neutron, mode, t_star, bins);
    match mode {
        QsdMode::Naive => {
            let states: Vec<PdmpState> = states_at(neutron, init, t_star, n, seed)?.into_iter().flatten().collect();
            if states.is_empty() {
                return Err(NeutronError::NoSurvivors(t_star));
            }
            h.effective_sample_size = states.len() as f64;
            fill(&mut h, &states);
        }
        QsdMode::FlemingViot => {
            let (states, restarts) = fleming_viot(neutron, init, t_star, n, seed);
            h.effective_sample_size = n as f64;
            h.restarts = restarts;
            fill(&mut h, &states);
        }
    }
    Ok(h)
}

#[derive(PartialEq)]
struct Event(f64, usize);

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Runs the cloud to `t_star`, processing absorptions in time order; an
/// absorbed particle restarts from the current state of a uniformly chosen
/// other particle.
fn fleming_viot(neutron: &Neutron, init: &InitLaw, t_star: f64, n: usize, seed: u64) -> (Vec<PdmpState>, u64) {
    let (mut lives, mut rngs): (Vec<Life>, Vec<_>) = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = particle_rng(seed, i);
            let s0 = init.sample(&neutron.region, &mut rng);
            (Life::run(neutron, s0, 0.0, t_star, &mut rng), rng)
        })
        .unzip();
    if t_star == 0.0 {
        let states = lives.iter().map(|l| l.state_at(0.0)).collect();
        return (states, 0);
    }
    let mut heap: BinaryHeap<Reverse<Event>> =
        lives.iter().enumerate().filter_map(|(i, l)| l.death.map(|d| Reverse(Event(d, i)))).collect();
    let mut chooser = control_rng(seed);
    let mut restarts = 0u64;
    while let Some(Reverse(Event(t, i))) = heap.pop() {
        let mut j = chooser.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let from = lives[j].state_at(t);
        lives[i] = Life::run(neutron, from, t, t_star, &mut rngs[i]);
        if let Some(d) = lives[i].death {
            heap.push(Reverse(Event(d, i)));
        }
        restarts += 1;
    }
    (lives.iter().map(|l| l.state_at(t_star)).collect(), restarts)
}

/// Survivors' states at `t` for a Dirac or random start, `None` for absorbed
/// particles, in particle order.
pub fn states_at(neutron: &Neutron, init: &InitLaw, t: f64, n: usize, seed: u64) -> Result<Vec<Option<PdmpState>>> {
    init.check(&neutron.region)?;
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = particle_rng(seed, i);
            let s0 = init.sample(&neutron.region, &mut rng);
            if t == 0.0 {
                return Some(s0);
            }
            let life = Life::run(neutron, s0, 0.0, t, &mut rng);
            life.death.is_none().then(|| life.state_at(t))
        })
        .collect())
}

/// Fraction of `n` particles alive at `t`; used where only the count matters.
pub fn survival_fraction(neutron: &Neutron, init: &InitLaw, t: f64, n: usize, seed: u64) -> Result<f64> {
    init.check(&neutron.region)?;
    let alive: usize = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = particle_rng(seed, i);
            let s0 = init.sample(&neutron.region, &mut rng);
            usize::from(absorption_time(neutron, s0, t, &mut rng).is_none())
        })
        .sum();
    Ok(alive as f64 / n as f64)
}
