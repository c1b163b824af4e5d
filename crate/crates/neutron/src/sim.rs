//! Straight flights at unit speed, direction renewed uniformly at the
//! jumps of a Poisson clock, killed on reaching the boundary.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NeutronError, Result};
use crate::geometry::{Domain, Point, Region};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeutronSpec {
    pub domain: Domain,
    /// Jump rate of the direction process.
    pub lambda: f64,
}

/// A validated [`NeutronSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Neutron {
    pub region: Region,
    lambda: f64,
}

impl Neutron {
    pub fn new(spec: &NeutronSpec) -> Result<Self> {
        if !(spec.lambda > 0.0 && spec.lambda.is_finite()) {
            return Err(NeutronError::InvalidArgument("jump rate must be positive and finite".into()));
        }
        Ok(Self { region: Region::new(spec.domain.clone())?, lambda: spec.lambda })
    }

    /// The `λ → 0` limit: straight flight until the boundary.
    pub fn without_jumps(domain: Domain) -> Result<Self> {
        Ok(Self { region: Region::new(domain)?, lambda: 0.0 })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn exit_time(&self, x: Point, u: Point) -> Result<f64> {
        self.region.exit_time(x, u)
    }

    fn next_jump(&self, rng: &mut impl Rng) -> f64 {
        if self.lambda == 0.0 {
            f64::INFINITY
        } else {
            // 1 - U lies in (0, 1].
            -(1.0 - rng.random::<f64>()).ln() / self.lambda
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdmpState {
    pub x: Point,
    pub u: Point,
    pub alive: bool,
}

impl PdmpState {
    pub fn new(x: Point, u: Point) -> Self {
        Self { x, u, alive: true }
    }

    pub fn angle(&self) -> f64 {
        self.u[1].atan2(self.u[0]).rem_euclid(TAU)
    }
}

pub fn random_direction(rng: &mut impl Rng) -> Point {
    let th = TAU * rng.random::<f64>();
    [th.cos(), th.sin()]
}

/// Independent stream for particle `index` under `seed`.
pub fn particle_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stream reserved for resampling decisions, disjoint from particle streams.
pub(crate) fn control_rng(seed: u64) -> ChaCha8Rng {
    particle_rng(seed, u64::MAX)
}

/// Initial law of `(X_0, V_0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitLaw {
    Dirac {
        x: Point,
        u: Point,
    },
    /// Fixed position, uniform direction.
    Point {
        x: Point,
    },
    /// Uniform position in the domain, uniform direction.
    Uniform,
}

impl InitLaw {
    pub fn check(&self, region: &Region) -> Result<()> {
        match *self {
            Self::Dirac { x, u } => {
                if ((u[0] * u[0] + u[1] * u[1]).sqrt() - 1.0).abs() > 1e-12 {
                    return Err(NeutronError::InvalidArgument("direction must be a unit vector".into()));
                }
                if !region.contains(x) {
                    return Err(NeutronError::Outside(x[0], x[1]));
                }
            }
            Self::Point { x } => {
                if !region.contains(x) {
                    return Err(NeutronError::Outside(x[0], x[1]));
                }
            }
            Self::Uniform => {}
        }
        Ok(())
    }

    pub fn sample(&self, region: &Region, rng: &mut impl Rng) -> PdmpState {
        match *self {
            Self::Dirac { x, u } => PdmpState::new(x, u),
            Self::Point { x } => PdmpState::new(x, random_direction(rng)),
            Self::Uniform => {
                let b = region.bounding_box();
                loop {
                    let x = [b[0] + (b[1] - b[0]) * rng.random::<f64>(), b[2] + (b[3] - b[2]) * rng.random::<f64>()];
                    if region.contains(x) {
                        return PdmpState::new(x, random_direction(rng));
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    /// `J_1 < J_2 < ..` up to absorption or the horizon.
    pub jump_times: Vec<f64>,
    /// Position at time 0 and at each jump.
    pub positions: Vec<Point>,
    /// Direction on each flight.
    pub directions: Vec<Point>,
    pub absorption_time: Option<f64>,
    /// State at the horizon, or at absorption (then `alive = false`).
    pub end: PdmpState,
}

pub fn simulate_path(n: &Neutron, x0: Point, u0: Point, horizon: f64, rng: &mut impl Rng) -> Result<PathRecord> {
    InitLaw::Dirac { x: x0, u: u0 }.check(&n.region)?;
    if !(horizon > 0.0) {
        return Err(NeutronError::InvalidArgument("horizon must be positive".into()));
    }
    let mut rec = PathRecord {
        jump_times: vec![],
        positions: vec![x0],
        directions: vec![u0],
        absorption_time: None,
        end: PdmpState::new(x0, u0),
    };
    let (mut x, mut u, mut t) = (x0, u0, 0.0);
    loop {
        let exit = n.region.exit_time_unchecked(x, u);
        let jump = n.next_jump(rng);
        if exit <= jump && t + exit <= horizon {
            let xe = [x[0] + exit * u[0], x[1] + exit * u[1]];
            rec.absorption_time = Some(t + exit);
            rec.end = PdmpState { x: xe, u, alive: false };
            return Ok(rec);
        }
        if t + jump > horizon || exit <= jump {
            let s = horizon - t;
            rec.end = PdmpState::new([x[0] + s * u[0], x[1] + s * u[1]], u);
            return Ok(rec);
        }
        x = [x[0] + jump * u[0], x[1] + jump * u[1]];
        t += jump;
        u = random_direction(rng);
        rec.jump_times.push(t);
        rec.positions.push(x);
        rec.directions.push(u);
    }
}

/// One flight segment `x(s) = x + (s - start) u` of a life.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment {
    pub start: f64,
    pub x: Point,
    pub u: Point,
}

/// A trajectory from a given state and time up to absorption or `until`.
#[derive(Debug, Clone)]
pub(crate) struct Life {
    pub segments: Vec<Segment>,
    /// Absorption time if it happens before `until`.
    pub death: Option<f64>,
}

impl Life {
    pub fn run(n: &Neutron, state: PdmpState, from: f64, until: f64, rng: &mut impl Rng) -> Self {
        let mut segments = vec![Segment { start: from, x: state.x, u: state.u }];
        let (mut x, mut u, mut t) = (state.x, state.u, from);
        loop {
            let exit = n.region.exit_time_unchecked(x, u);
            let jump = n.next_jump(rng);
            if exit <= jump {
                let death = t + exit;
                return Self { segments, death: (death <= until).then_some(death) };
            }
            if t + jump > until {
                return Self { segments, death: None };
            }
            x = [x[0] + jump * u[0], x[1] + jump * u[1]];
            t += jump;
            u = random_direction(rng);
            segments.push(Segment { start: t, x, u });
        }
    }

    /// State at time `t`, which must precede the death time.
    pub fn state_at(&self, t: f64) -> PdmpState {
        let k = self.segments.partition_point(|s| s.start <= t).max(1) - 1;
        let s = self.segments[k];
        let dt = t - s.start;
        PdmpState::new([s.x[0] + dt * s.u[0], s.x[1] + dt * s.u[1]], s.u)
    }
}

/// Absorption time of one particle, `None` if it survives past `until`.
pub(crate) fn absorption_time(n: &Neutron, state: PdmpState, until: f64, rng: &mut impl Rng) -> Option<f64> {
    let (mut x, mut u, mut t) = (state.x, state.u, 0.0);
    loop {
        let exit = n.region.exit_time_unchecked(x, u);
        let jump = n.next_jump(rng);
        if exit <= jump {
            return (t + exit <= until).then_some(t + exit);
        }
        if t + jump > until {
            return None;
        }
        x = [x[0] + jump * u[0], x[1] + jump * u[1]];
        t += jump;
        u = random_direction(rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(lambda: f64) -> Neutron {
        Neutron::new(&NeutronSpec { domain: Domain::Disk { center: [0.0, 0.0], radius: 1.0 }, lambda }).unwrap()
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Neutron::new(&NeutronSpec { domain: Domain::Disk { center: [0.0, 0.0], radius: 1.0 }, lambda: 0.0 })
            .is_err());
        let n = disk(1.0);
        let mut rng = particle_rng(1, 0);
        assert!(simulate_path(&n, [2.0, 0.0], [1.0, 0.0], 1.0, &mut rng).is_err());
        assert!(simulate_path(&n, [0.0, 0.0], [1.0, 1.0], 1.0, &mut rng).is_err());
        assert!(simulate_path(&n, [0.0, 0.0], [1.0, 0.0], 0.0, &mut rng).is_err());
    }

    #[test]
    fn free_flight_hits_the_wall() {
        let n = Neutron::without_jumps(Domain::Disk { center: [0.0, 0.0], radius: 1.0 }).unwrap();
        let mut rng = particle_rng(3, 0);
        let p = simulate_path(&n, [0.5, 0.0], [1.0, 0.0], 10.0, &mut rng).unwrap();
        assert_eq!(p.absorption_time, Some(0.5));
        assert!(p.jump_times.is_empty());
        let p = simulate_path(&n, [0.5, 0.0], [1.0, 0.0], 0.25, &mut rng).unwrap();
        assert_eq!(p.absorption_time, None);
        assert_eq!(p.end.x, [0.75, 0.0]);
    }

    #[test]
    fn paths_are_consistent() {
        let n = disk(3.0);
        for i in 0..200 {
            let mut rng = particle_rng(11, i);
            let p = simulate_path(&n, [0.1, -0.2], [0.0, 1.0], 5.0, &mut rng).unwrap();
            assert_eq!(p.positions.len(), p.jump_times.len() + 1);
            assert!(p.jump_times.windows(2).all(|w| w[0] < w[1]));
            for (k, &x) in p.positions.iter().enumerate() {
                assert!(n.region.contains(x));
                let u = p.directions[k];
                assert!(((u[0] * u[0] + u[1] * u[1]).sqrt() - 1.0).abs() < 1e-12);
            }
            if let Some(tau) = p.absorption_time {
                assert!(!p.end.alive);
                assert!(n.region.distance_to_boundary(p.end.x).abs() < 1e-12);
                assert!(tau >= p.jump_times.last().copied().unwrap_or(0.0));
            }
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = (0..4).map(|_| particle_rng(7, 2).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let x: f64 = particle_rng(7, 2).random();
        let y: f64 = particle_rng(7, 3).random();
        let z: f64 = particle_rng(8, 2).random();
        assert!(x != y && x != z);
    }

    #[test]
    fn life_matches_path_on_shared_stream() {
        let n = disk(2.0);
        for i in 0..50 {
            let p = simulate_path(&n, [0.0, 0.0], [1.0, 0.0], 3.0, &mut particle_rng(5, i)).unwrap();
            let l = Life::run(&n, PdmpState::new([0.0, 0.0], [1.0, 0.0]), 0.0, 3.0, &mut particle_rng(5, i));
            assert_eq!(p.absorption_time, l.death);
            let tau = absorption_time(&n, PdmpState::new([0.0, 0.0], [1.0, 0.0]), 3.0, &mut particle_rng(5, i));
            assert_eq!(tau, l.death);
            if l.death.is_none() {
                let s = l.state_at(3.0);
                assert!((s.x[0] - p.end.x[0]).abs() < 1e-12 && (s.x[1] - p.end.x[1]).abs() < 1e-12);
            }
        }
    }
}
