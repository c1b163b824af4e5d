//! Finite absorbed continuous-time Markov chains.
//!
//! A chain lives on `E = {0, .., n-1}` plus a cemetery `∂`. It is described by
//! non-negative off-diagonal rates on `E` and a per-state absorption (kill)
//! rate to `∂`. The diagonal of the sub-generator is the negated total outflow,
//! so every row of the full generator on `E ∪ {∂}` sums to zero.
//!
//! Time evolution uses uniformization: with `Λ` the largest total outflow,
//! `P = I + L/Λ` is entrywise non-negative and `exp(tL) = Σ_k Pois(Λt; k) P^k`.
//! Vector propagation runs in short steps with renormalization, so conditioned
//! laws at arbitrarily deep horizons never underflow.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{QsdError, Result};
use crate::linalg::Matrix;
use crate::scalar::{self, Real};

/// Relative Poisson tail at which uniformization series are truncated.
const POISSON_TAIL: f64 = 1e-14;
/// Largest `Λh` per renormalized vector step; one-step survival is then `≥ e^-4`.
const VECTOR_STEP: f64 = 4.0;
/// Survival mass below which conditioning refuses to divide.
pub const UNDERFLOW_FLOOR: f64 = 1e-280;

/// Sub-Markov generator of an absorbed chain, stored by sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorbedGenerator<T> {
    n: usize,
    /// Off-diagonal rates per row, sorted by column, zeros omitted.
    rows: Vec<Vec<(usize, T)>>,
    kill: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub transitions: usize,
    pub absorbing_states: Vec<usize>,
    /// States with zero total outflow. Allowed only while `∂` stays reachable,
    /// which cannot happen for such a state, so this is empty on success.
    pub stuck_states: Vec<usize>,
}

impl<T: Real> AbsorbedGenerator<T> {
    /// Builds from a dense rate table (diagonal ignored) and kill rates.
    ///
    /// Checks shapes and signs only; reachability of `∂` is checked by
    /// [`validate`](Self::validate).
    pub fn from_dense(rates: &[Vec<T>], kill: Vec<T>) -> Result<Self> {
        let n = kill.len();
        if rates.len() != n {
            return Err(QsdError::Shape(format!("{} rate rows for {n} kill entries", rates.len())));
        }
        let mut rows = Vec::with_capacity(n);
        for (i, r) in rates.iter().enumerate() {
            if r.len() != n {
                return Err(QsdError::Structural { row: i, reason: format!("length {} != {n}", r.len()) });
            }
            let mut row = Vec::new();
            for (j, &q) in r.iter().enumerate() {
                if i == j {
                    continue;
                }
                check_rate(i, q, "rate")?;
                if q > T::zero() {
                    row.push((j, q));
                }
            }
            rows.push(row);
        }
        for (i, &k) in kill.iter().enumerate() {
            check_rate(i, k, "kill rate")?;
        }
        Ok(Self { n, rows, kill })
    }

    /// Builds from sparse rows `(target, rate)`. Duplicates are summed.
    pub fn from_sparse(rows: Vec<Vec<(usize, T)>>, kill: Vec<T>) -> Result<Self> {
        let n = kill.len();
        if rows.len() != n {
            return Err(QsdError::Shape(format!("{} rate rows for {n} kill entries", rows.len())));
        }
        let mut clean = Vec::with_capacity(n);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            let mut out: Vec<(usize, T)> = Vec::with_capacity(row.len());
            for (j, q) in row {
                if j >= n {
                    return Err(QsdError::Structural { row: i, reason: format!("target {j} out of range") });
                }
                if j == i {
                    return Err(QsdError::Structural { row: i, reason: "self-transition".into() });
                }
                check_rate(i, q, "rate")?;
                match out.last_mut() {
                    Some(last) if last.0 == j => last.1 = last.1 + q,
                    _ if q > T::zero() => out.push((j, q)),
                    _ => {}
                }
            }
            clean.push(out);
        }
        for (i, &k) in kill.iter().enumerate() {
            check_rate(i, k, "kill rate")?;
        }
        Ok(Self { n, rows: clean, kill })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kill(&self) -> &[T] {
        &self.kill
    }

    pub fn sparse_row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    pub fn rate(&self, i: usize, j: usize) -> T {
        self.rows[i].binary_search_by_key(&j, |&(c, _)| c).map_or(T::zero(), |k| self.rows[i][k].1)
    }

    /// Total jump rate out of `i`, absorption included.
    pub fn outflow(&self, i: usize) -> T {
        self.rows[i].iter().map(|&(_, q)| q).sum::<T>() + self.kill[i]
    }

    /// Uniformization rate `Λ = max_i outflow(i)`.
    pub fn uniformization_rate(&self) -> T {
        (0..self.n).map(|i| self.outflow(i)).fold(T::zero(), T::max)
    }

    pub fn dense_rates(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.n]; self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, q) in row {
                out[i][j] = q;
            }
        }
        out
    }

    /// The generator `L` restricted to `E` (diagonal = -outflow).
    pub fn sub_generator(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, q) in row {
                m[(i, j)] = q;
            }
            m[(i, i)] = -self.outflow(i);
        }
        m
    }

    /// `v L` for a row vector.
    pub fn apply_left(&self, v: &[T]) -> Vec<T> {
        let mut out: Vec<T> = v.iter().enumerate().map(|(i, &x)| -x * self.outflow(i)).collect();
        for (i, row) in self.rows.iter().enumerate() {
            let vi = v[i];
            if vi == T::zero() {
                continue;
            }
            for &(j, q) in row {
                out[j] = out[j] + vi * q;
            }
        }
        out
    }

    /// `L w` for a column vector.
    pub fn apply_right(&self, w: &[T]) -> Vec<T> {
        (0..self.n).map(|i| self.rows[i].iter().map(|&(j, q)| q * w[j]).sum::<T>() - self.outflow(i) * w[i]).collect()
    }

    /// Checks every structural invariant and that `∂` is reachable from every state.
    pub fn validate(&self) -> Result<ValidationReport> {
        if self.n == 0 {
            return Err(QsdError::InvalidArgument("empty state space".into()));
        }
        for i in 0..self.n {
            check_rate(i, self.kill[i], "kill rate")?;
            for &(j, q) in &self.rows[i] {
                if j == i || j >= self.n {
                    return Err(QsdError::Structural { row: i, reason: format!("bad target {j}") });
                }
                check_rate(i, q, "rate")?;
            }
        }
        // Backward search from the states that leak into ∂.
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row {
                rev[j].push(i);
            }
        }
        let absorbing: Vec<usize> = (0..self.n).filter(|&i| self.kill[i] > T::zero()).collect();
        let mut seen = vec![false; self.n];
        let mut queue: VecDeque<usize> = absorbing.iter().copied().collect();
        for &i in &absorbing {
            seen[i] = true;
        }
        while let Some(j) = queue.pop_front() {
            for &i in &rev[j] {
                if !seen[i] {
                    seen[i] = true;
                    queue.push_back(i);
                }
            }
        }
        let unreachable: Vec<usize> = (0..self.n).filter(|&i| !seen[i]).collect();
        if !unreachable.is_empty() {
            return Err(QsdError::Unreachable { states: unreachable });
        }
        Ok(ValidationReport {
            n: self.n,
            transitions: self.rows.iter().map(Vec::len).sum(),
            absorbing_states: absorbing,
            stuck_states: (0..self.n).filter(|&i| self.outflow(i) == T::zero()).collect(),
        })
    }

    /// `P_t = exp(tL)` restricted to `E`, by uniformization plus squaring.
    pub fn transition_matrix(&self, t: T) -> Result<Matrix<T>> {
        check_time(t)?;
        let n = self.n;
        let lam = self.uniformization_rate();
        if t == T::zero() || lam == T::zero() {
            return Ok(Matrix::identity(n));
        }
        let mut squarings = 0i32;
        let mut lh = lam * t;
        while lh > T::one() {
            lh = lh / T::lit(2.0);
            squarings += 1;
        }
        let p = self.uniformized(lam);
        let weights = poisson_weights(lh);
        let mut term = Matrix::identity(n);
        let mut acc = Matrix::zeros(n, n);
        for (k, &w) in weights.iter().enumerate() {
            if k > 0 {
                term = term.matmul(&p);
            }
            for i in 0..n {
                for (a, &b) in acc.row_mut(i).iter_mut().zip(term.row(i)) {
                    *a = *a + w * b;
                }
            }
        }
        for _ in 0..squarings {
            acc = acc.matmul(&acc);
        }
        Ok(acc)
    }

    /// Dense `P = I + L/Λ`.
    fn uniformized(&self, lam: T) -> Matrix<T> {
        let mut p = Matrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, q) in row {
                p[(i, j)] = q / lam;
            }
            p[(i, i)] = T::one() - self.outflow(i) / lam;
        }
        p
    }

    /// `v P` with `P = I + L/Λ`, sparse.
    fn uniformized_left(&self, v: &[T], lam: T) -> Vec<T> {
        let mut out: Vec<T> = v.iter().enumerate().map(|(i, &x)| x * (T::one() - self.outflow(i) / lam)).collect();
        for (i, row) in self.rows.iter().enumerate() {
            let vi = v[i];
            if vi == T::zero() {
                continue;
            }
            for &(j, q) in row {
                out[j] = out[j] + vi * (q / lam);
            }
        }
        out
    }

    /// `P w`, sparse.
    fn uniformized_right(&self, w: &[T], lam: T) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                self.rows[i].iter().map(|&(j, q)| (q / lam) * w[j]).sum::<T>()
                    + (T::one() - self.outflow(i) / lam) * w[i]
            })
            .collect()
    }

    /// Propagates a non-negative row vector: returns `v P_t / |v P_t|₁` and
    /// `ln(|v P_t|₁ / |v|₁)`.
    pub fn propagate_left(&self, v: &[T], t: T) -> Result<(Vec<T>, T)> {
        self.propagate(v, t, Side::Left)
    }

    /// Propagates a non-negative column vector: returns `P_t w / max(P_t w)` and
    /// `ln(max(P_t w) / max(w))`.
    pub fn propagate_right(&self, w: &[T], t: T) -> Result<(Vec<T>, T)> {
        self.propagate(w, t, Side::Right)
    }

    fn propagate(&self, v: &[T], t: T, side: Side) -> Result<(Vec<T>, T)> {
        check_time(t)?;
        if v.len() != self.n {
            return Err(QsdError::Shape(format!("vector length {} != {}", v.len(), self.n)));
        }
        let norm = |x: &[T]| match side {
            Side::Left => scalar::sum(x),
            Side::Right => scalar::max_of(x),
        };
        let m0 = norm(v);
        if !(m0 > T::zero()) {
            return Err(QsdError::InvalidArgument("vector has no positive mass".into()));
        }
        let mut cur: Vec<T> = v.iter().map(|&x| x / m0).collect();
        let mut log_mass = T::zero();
        let lam = self.uniformization_rate();
        if t == T::zero() || lam == T::zero() {
            return Ok((cur, log_mass));
        }
        let total = lam * t;
        let steps = (total / T::lit(VECTOR_STEP)).ceil().max(T::one());
        let nsteps = steps.to_usize().unwrap_or(usize::MAX);
        let lh = total / steps;
        let weights = poisson_weights(lh);
        for _ in 0..nsteps {
            let mut term = cur.clone();
            let mut acc: Vec<T> = term.iter().map(|&x| x * weights[0]).collect();
            for &w in &weights[1..] {
                term = match side {
                    Side::Left => self.uniformized_left(&term, lam),
                    Side::Right => self.uniformized_right(&term, lam),
                };
                for (a, &b) in acc.iter_mut().zip(&term) {
                    *a = *a + w * b;
                }
            }
            let m = norm(&acc);
            if !(m.as_f64() > UNDERFLOW_FLOOR) {
                return Err(QsdError::HorizonTooDeep { survival: m.as_f64() });
            }
            log_mass = log_mass + m.ln();
            cur = acc.into_iter().map(|x| x / m).collect();
        }
        Ok((cur, log_mass))
    }

    /// `P_μ(t < τ_∂) = μ P_t 1_E`.
    pub fn survival_probability(&self, mu: &DistributionVector<T>, t: T) -> Result<T> {
        Ok(self.log_survival_probability(mu, t)?.exp())
    }

    /// `ln P_μ(t < τ_∂)`, finite at any depth.
    pub fn log_survival_probability(&self, mu: &DistributionVector<T>, t: T) -> Result<T> {
        self.check_law(mu)?;
        Ok(self.propagate_left(mu.weights(), t)?.1)
    }

    /// The survival vector `x ↦ P_x(t < τ_∂)`.
    pub fn survival_vector(&self, t: T) -> Result<Vec<T>> {
        let (w, log_max) = self.propagate_right(&vec![T::one(); self.n], t)?;
        let s = log_max.exp();
        Ok(w.into_iter().map(|x| x * s).collect())
    }

    /// `φ_t(μ) = P_μ(X_t ∈ · | t < τ_∂)`.
    pub fn condition(&self, mu: &DistributionVector<T>, t: T) -> Result<DistributionVector<T>> {
        self.check_law(mu)?;
        let (v, _) = self.propagate_left(mu.weights(), t)?;
        Ok(DistributionVector::renormalized(v))
    }

    /// `μ R^T_{s,t}`: law at time `t` of the chain found with law `μ` at time
    /// `s` and conditioned on surviving up to the horizon `T`.
    ///
    /// `R^T_{s,t}(x, y) = P_{t−s}(x, y) P_y(T−t < τ_∂) / P_x(T−s < τ_∂)`.
    pub fn conditional_semigroup_apply(
        &self,
        mu: &DistributionVector<T>,
        s: T,
        t: T,
        horizon: T,
    ) -> Result<DistributionVector<T>> {
        self.check_law(mu)?;
        if !(T::zero() <= s && s <= t && t <= horizon) {
            return Err(QsdError::InvalidArgument(format!("need 0 <= s <= t <= T, got s={s}, t={t}, T={horizon}")));
        }
        if s == t {
            return Ok(mu.clone());
        }
        let ones = vec![T::one(); self.n];
        let (w_start, _) = self.propagate_right(&ones, horizon - s)?;
        let (w_end, _) = self.propagate_right(&ones, horizon - t)?;
        let mut start = Vec::with_capacity(self.n);
        for (&m, &w) in mu.weights().iter().zip(&w_start) {
            if m == T::zero() {
                start.push(T::zero());
            } else if w.as_f64() > UNDERFLOW_FLOOR {
                start.push(m / w);
            } else {
                return Err(QsdError::HorizonTooDeep { survival: w.as_f64() });
            }
        }
        let (v, _) = self.propagate_left(&start, t - s)?;
        let prod: Vec<T> = v.iter().zip(&w_end).map(|(&a, &b)| a * b).collect();
        let m = scalar::sum(&prod);
        if !(m.as_f64() > UNDERFLOW_FLOOR) {
            return Err(QsdError::HorizonTooDeep { survival: m.as_f64() });
        }
        Ok(DistributionVector::renormalized(prod))
    }

    /// Rows of the conditioned kernel `K_t(x, ·) = P_x(X_t ∈ · | t < τ_∂)`.
    pub fn conditioned_kernel(&self, t: T) -> Result<Matrix<T>> {
        let mut p = self.transition_matrix(t)?;
        for i in 0..self.n {
            let row = p.row_mut(i);
            let s: T = row.iter().copied().sum();
            if !(s.as_f64() > UNDERFLOW_FLOOR) {
                return Err(QsdError::HorizonTooDeep { survival: s.as_f64() });
            }
            for x in row.iter_mut() {
                *x = *x / s;
            }
        }
        Ok(p)
    }

    fn check_law(&self, mu: &DistributionVector<T>) -> Result<()> {
        if mu.len() != self.n {
            return Err(QsdError::Shape(format!("law of length {} on {} states", mu.len(), self.n)));
        }
        if !mu.is_normalized() {
            return Err(QsdError::InvalidArgument("initial law must be normalized".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
}

fn check_rate<T: Real>(row: usize, q: T, what: &str) -> Result<()> {
    if q.is_finite() && q >= T::zero() {
        Ok(())
    } else {
        Err(QsdError::Structural { row, reason: format!("{what} {q} is negative or non-finite") })
    }
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if t.is_finite() && t >= T::zero() {
        Ok(())
    } else {
        Err(QsdError::InvalidArgument(format!("time {t} must be finite and non-negative")))
    }
}

/// Poisson(`m`) probabilities `k = 0, 1, ..` truncated once the remaining tail
/// is below `POISSON_TAIL`. Intended for moderate `m` (no underflow of `e^-m`).
fn poisson_weights<T: Real>(m: T) -> Vec<T> {
    let tail = T::lit(POISSON_TAIL).max(T::epsilon() * T::lit(0.5));
    let mut w = vec![(-m).exp()];
    let mut acc = w[0];
    let mut k = 0usize;
    loop {
        let next = w[k] * m / T::from_count(k + 1);
        k += 1;
        w.push(next);
        acc = acc + next;
        if T::from_count(k) > m {
            let q = m / T::from_count(k + 1);
            if next * q / (T::one() - q) <= tail || T::one() - acc <= tail {
                break;
            }
        }
    }
    w
}

/// A measure on `E`: non-negative weights, optionally known to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionVector<T> {
    weights: Vec<T>,
    normalized: bool,
}

impl<T: Real> DistributionVector<T> {
    fn sum_tol() -> T {
        T::lit(1e-12).max(T::epsilon() * T::lit(4096.0))
    }

    /// A non-negative measure; flagged normalized when its mass is 1.
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.iter().any(|&w| !(w >= T::zero()) || !w.is_finite()) {
            return Err(QsdError::InvalidArgument("weights must be finite and non-negative".into()));
        }
        let normalized = (scalar::sum(&weights) - T::one()).abs() <= Self::sum_tol();
        Ok(Self { weights, normalized })
    }

    /// A probability vector; rejects anything whose mass is not 1.
    pub fn probability(weights: Vec<T>) -> Result<Self> {
        let d = Self::new(weights)?;
        if !d.normalized {
            return Err(QsdError::InvalidArgument(format!("mass {} is not 1", scalar::sum(&d.weights))));
        }
        Ok(d)
    }

    /// Scales a non-negative vector of positive mass to a probability vector.
    pub fn normalize(weights: Vec<T>) -> Result<Self> {
        let d = Self::new(weights)?;
        let m = scalar::sum(&d.weights);
        if !(m > T::zero()) {
            return Err(QsdError::InvalidArgument("zero mass".into()));
        }
        Ok(Self::renormalized(d.weights))
    }

    fn renormalized(mut weights: Vec<T>) -> Self {
        let m = scalar::sum(&weights);
        for w in &mut weights {
            *w = (*w / m).max(T::zero());
        }
        Self { weights, normalized: true }
    }

    pub fn dirac(n: usize, i: usize) -> Self {
        let mut weights = vec![T::zero(); n];
        weights[i] = T::one();
        Self { weights, normalized: true }
    }

    pub fn uniform(n: usize) -> Self {
        Self { weights: vec![T::one() / T::from_count(n); n], normalized: true }
    }

    #[inline]
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<T> {
        self.weights
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn mass(&self) -> T {
        scalar::sum(&self.weights)
    }

    /// `μ(f) = Σ μ(x) f(x)`.
    pub fn integrate(&self, f: &[T]) -> T {
        scalar::dot(&self.weights, f)
    }
}

impl<T: Real + Serialize> Serialize for DistributionVector<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.weights.serialize(s)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for DistributionVector<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = Vec::<T>::deserialize(d)?;
        Self::new(w).map_err(serde::de::Error::custom)
    }
}

/// Total variation distance as the total mass of `|μ₁ - μ₂|` (2 for disjoint
/// probability measures).
pub fn tv_distance<T: Real>(mu1: &[T], mu2: &[T]) -> Result<T> {
    if mu1.len() != mu2.len() {
        return Err(QsdError::Shape(format!("lengths {} and {}", mu1.len(), mu2.len())));
    }
    Ok(scalar::l1_diff(mu1, mu2))
}

/// Survival probabilities on an increasing time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> SurvivalCurve<T> {
    pub fn new(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(QsdError::Shape("times and values differ in length".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(QsdError::InvalidArgument("time grid must be strictly increasing".into()));
        }
        if values.iter().any(|&v| !(T::zero() <= v && v <= T::one())) {
            return Err(QsdError::InvalidArgument("survival values must lie in [0, 1]".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(QsdError::InvalidArgument("survival values must be non-increasing".into()));
        }
        Ok(Self { times, values })
    }

    /// Exact survival curve of `μ` on the given grid.
    pub fn of_chain(gen: &AbsorbedGenerator<T>, mu: &DistributionVector<T>, times: Vec<T>) -> Result<Self> {
        gen.check_law(mu)?;
        let mut values = Vec::with_capacity(times.len());
        let mut cur = mu.weights().to_vec();
        let mut log_s = T::zero();
        let mut last = T::zero();
        for &t in &times {
            if t < last {
                return Err(QsdError::InvalidArgument("time grid must be increasing".into()));
            }
            let (v, dl) = gen.propagate_left(&cur, t - last)?;
            cur = v;
            log_s = log_s + dl;
            last = t;
            values.push(log_s.exp().min(T::one()));
        }
        // Monotone by construction up to rounding; clamp so the invariant holds exactly.
        for k in 1..values.len() {
            if values[k] > values[k - 1] {
                values[k] = values[k - 1];
            }
        }
        Self::new(times, values)
    }
}

#[derive(Serialize, Deserialize)]
struct GeneratorRepr<T> {
    n: usize,
    rates: Vec<Vec<T>>,
    kill: Vec<T>,
}

impl<T: Real + Serialize> Serialize for AbsorbedGenerator<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GeneratorRepr { n: self.n, rates: self.dense_rates(), kill: self.kill.clone() }.serialize(s)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for AbsorbedGenerator<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = GeneratorRepr::<T>::deserialize(d)?;
        if r.n != r.kill.len() {
            return Err(serde::de::Error::custom(format!("n = {} but {} kill rates", r.n, r.kill.len())));
        }
        Self::from_dense(&r.rates, r.kill).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2() -> AbsorbedGenerator<f64> {
        AbsorbedGenerator::from_dense(&[vec![0.0, 1.0], vec![2.0, 0.0]], vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn single_state_is_valid() {
        let g = AbsorbedGenerator::from_dense(&[vec![0.0]], vec![0.3]).unwrap();
        let r = g.validate().unwrap();
        assert_eq!(r.absorbing_states, vec![0]);
    }

    #[test]
    fn no_kill_is_unreachable() {
        let g = AbsorbedGenerator::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(g.validate(), Err(QsdError::Unreachable { states: vec![0, 1] }));
    }

    #[test]
    fn t2_is_valid_and_rows_balance() {
        let g = t2();
        g.validate().unwrap();
        let l = g.sub_generator();
        for (i, s) in l.row_sums().iter().enumerate() {
            assert_eq!(s + g.kill()[i], 0.0);
        }
    }

    #[test]
    fn partial_reachability_names_the_stuck_states() {
        // 0 -> 1 -> ∂, while {2, 3} form a closed class.
        let g = AbsorbedGenerator::from_dense(
            &[vec![0.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0, 0.0]],
            vec![0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(g.validate(), Err(QsdError::Unreachable { states: vec![2, 3] }));
    }

    #[test]
    fn negative_rate_reports_row() {
        let e = AbsorbedGenerator::from_dense(&[vec![0.0, 1.0], vec![-2.0, 0.0]], vec![1.0, 0.0]).unwrap_err();
        assert!(matches!(e, QsdError::Structural { row: 1, .. }));
        let e = AbsorbedGenerator::from_dense(&[vec![0.0, 1.0], vec![2.0, 0.0]], vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(e, QsdError::Structural { row: 1, .. }));
    }

    #[test]
    fn zero_outflow_state_without_path_is_rejected() {
        let g = AbsorbedGenerator::from_dense(&[vec![0.0, 1.0], vec![0.0, 0.0]], vec![1.0, 0.0]).unwrap();
        assert_eq!(g.validate(), Err(QsdError::Unreachable { states: vec![1] }));
    }

    #[test]
    fn transition_at_zero_is_identity() {
        let p = t2().transition_matrix(0.0).unwrap();
        assert_eq!(p, Matrix::identity(2));
    }

    #[test]
    fn scalar_chain_decays_exponentially() {
        let q: f64 = 0.7;
        let g = AbsorbedGenerator::from_dense(&[vec![0.0]], vec![q]).unwrap();
        for t in [0.1, 1.0, 5.0, 40.0] {
            let p = g.transition_matrix(t).unwrap();
            assert!((p[(0, 0)] / (-q * t).exp() - 1.0).abs() < 1e-12, "t={t}");
            let s = g.survival_probability(&DistributionVector::dirac(1, 0), t).unwrap();
            assert!((s / (-q * t).exp() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_time_rejected() {
        assert!(t2().transition_matrix(-1.0).is_err());
        assert!(t2().condition(&DistributionVector::dirac(2, 0), -0.5).is_err());
    }

    #[test]
    fn condition_at_zero_is_identity() {
        let mu = DistributionVector::probability(vec![0.25, 0.75]).unwrap();
        let c = t2().condition(&mu, 0.0).unwrap();
        assert_eq!(c.weights(), mu.weights());
    }

    #[test]
    fn very_deep_horizon_does_not_underflow() {
        let g = t2();
        let mu = DistributionVector::dirac(2, 0);
        let c = g.condition(&mu, 2000.0).unwrap();
        let l = g.log_survival_probability(&mu, 2000.0).unwrap();
        assert!(l < -1000.0 && l.is_finite());
        let a0 = 2.0 - 2f64.sqrt();
        assert!((c.weights()[0] - a0).abs() < 1e-10);
    }

    #[test]
    fn semigroup_endpoints() {
        let g = t2();
        let mu = DistributionVector::probability(vec![0.4, 0.6]).unwrap();
        let same = g.conditional_semigroup_apply(&mu, 1.0, 1.0, 3.0).unwrap();
        for (a, b) in same.weights().iter().zip(mu.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
        let x0 = DistributionVector::dirac(2, 1);
        let r = g.conditional_semigroup_apply(&x0, 0.0, 2.5, 2.5).unwrap();
        let c = g.condition(&x0, 2.5).unwrap();
        assert!(tv_distance(r.weights(), c.weights()).unwrap() < 1e-13);
        let two_step = g.conditional_semigroup_apply(&mu, 0.5, 1.2, 3.0).unwrap();
        let two_step = g.conditional_semigroup_apply(&two_step, 1.2, 2.0, 3.0).unwrap();
        let one_step = g.conditional_semigroup_apply(&mu, 0.5, 2.0, 3.0).unwrap();
        assert!(tv_distance(two_step.weights(), one_step.weights()).unwrap() < 1e-12);
        assert!(g.conditional_semigroup_apply(&mu, 2.0, 1.0, 3.0).is_err());
        assert!(g.conditional_semigroup_apply(&mu, 0.0, 4.0, 3.0).is_err());
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
        assert!((tv_distance::<f64>(&[0.7, 0.3], &[0.4, 0.6]).unwrap() - 0.6).abs() < 1e-15);
        assert!(tv_distance(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn distribution_vector_checks() {
        assert!(DistributionVector::probability(vec![0.5, 0.4]).is_err());
        assert!(DistributionVector::<f64>::new(vec![-0.1, 1.1]).is_err());
        let d = DistributionVector::normalize(vec![2.0, 6.0]).unwrap();
        assert_eq!(d.weights(), &[0.25, 0.75]);
        assert!(d.is_normalized());
        assert!(!DistributionVector::new(vec![0.2, 0.2]).unwrap().is_normalized());
    }

    #[test]
    fn survival_curve_invariants() {
        assert!(SurvivalCurve::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(SurvivalCurve::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        let c = SurvivalCurve::of_chain(&t2(), &DistributionVector::dirac(2, 1), vec![0.0, 0.5, 1.0, 2.0]).unwrap();
        assert_eq!(c.values[0], 1.0);
        assert!(c.values.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn generator_json_shape() {
        let js = serde_json::to_value(t2()).unwrap();
        assert_eq!(js, serde_json::json!({"n": 2, "rates": [[0.0, 1.0], [2.0, 0.0]], "kill": [1.0, 0.0]}));
        let back: AbsorbedGenerator<f64> = serde_json::from_value(js).unwrap();
        assert_eq!(back, t2());
        let bad = serde_json::json!({"n": 3, "rates": [[0.0]], "kill": [1.0]});
        assert!(serde_json::from_value::<AbsorbedGenerator<f64>>(bad).is_err());
    }

    #[test]
    fn poisson_weights_sum_to_one() {
        for m in [0.01, 0.5, 1.0, 4.0] {
            let w = poisson_weights(m);
            let s: f64 = w.iter().sum();
            assert!((s - 1.0).abs() < 1e-13, "m={m} sum={s}");
        }
    }
}
