//! Birth-death models as absorbed generators.
//!
//! * 1-D birth-death with catastrophes on `{1, .., N}`: birth `b_k`, death
//!   `d_k`, catastrophe `a_k` straight to `∂ = 0`.
//! * Multi-type birth-death with mutation and competition (`∂ = 0`).
//! * Multi-type weakly cooperative birth-death, absorbed as soon as one type
//!   goes extinct.
//!
//! Births that would leave the truncation box are dropped.

use serde::{Deserialize, Serialize};

use crate::chain::AbsorbedGenerator;
use crate::error::{QsdError, Result};
use crate::rates::RateSeq;
use crate::scalar::Real;

pub const DEFAULT_STATE_BUDGET: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct BDSpec<T> {
    pub b: RateSeq<T>,
    pub d: RateSeq<T>,
    #[serde(default = "zero_rate")]
    pub a: RateSeq<T>,
    #[serde(rename = "N")]
    pub n: usize,
}

fn zero_rate<T: Real>() -> RateSeq<T> {
    RateSeq::Const(T::zero())
}

impl<T: Real> BDSpec<T> {
    pub fn new(b: RateSeq<T>, d: RateSeq<T>, a: RateSeq<T>, n: usize) -> Self {
        Self { b, d, a, n }
    }

    /// Parses the three rate expressions.
    pub fn from_exprs(b: &str, d: &str, a: &str, n: usize) -> Result<Self> {
        Ok(Self::new(RateSeq::parse(b)?, RateSeq::parse(d)?, RateSeq::parse(a)?, n))
    }

    pub fn with_truncation(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }
}

/// States `1..=N` map to indices `0..N`.
pub fn build_bd<T: Real>(spec: &BDSpec<T>) -> Result<AbsorbedGenerator<T>> {
    let n = spec.n;
    if n == 0 {
        return Err(QsdError::InvalidArgument("truncation level N must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(n);
    let mut kill = Vec::with_capacity(n);
    for k in 1..=n {
        let b = spec.b.eval(k)?;
        let d = spec.d.eval(k)?;
        let a = spec.a.eval(k)?;
        if !(b > T::zero()) || !(d > T::zero()) || !b.is_finite() || !d.is_finite() {
            return Err(QsdError::InvalidArgument(format!("need b_k, d_k > 0; got b_{k} = {b}, d_{k} = {d}")));
        }
        if !(a >= T::zero()) || !a.is_finite() {
            return Err(QsdError::InvalidArgument(format!("need a_k >= 0; got a_{k} = {a}")));
        }
        let mut row = Vec::with_capacity(2);
        if k > 1 {
            row.push((k - 2, d));
        }
        if k < n {
            row.push((k, b));
        }
        rows.push(row);
        kill.push(if k == 1 { a + d } else { a });
    }
    AbsorbedGenerator::from_sparse(rows, kill)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiMode {
    /// Births `b^i(x) = Σ_j λ_ji x_j`, deaths `d^i(x) = μ_i x_i + Σ_j c_ij x_i x_j`.
    Mutation,
    /// Births `b^i(x) = λ_i x_i + Σ_{j≠i} c_ij x_i x_j`, deaths `d^i(x) = μ_i x_i + c_ii x_i²`.
    Cooperative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BirthRates<T> {
    /// `λ_ij`: rate at which a type-`i` individual produces a type-`j` one.
    Matrix(Vec<Vec<T>>),
    PerType(Vec<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiBDSpec<T> {
    pub mode: MultiMode,
    pub lambda: BirthRates<T>,
    pub mu: Vec<T>,
    pub c: Vec<Vec<T>>,
    /// Per-coordinate truncation.
    pub cap: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_budget() -> usize {
    DEFAULT_STATE_BUDGET
}

impl<T: Real> MultiBDSpec<T> {
    pub fn mutation(lambda: Vec<Vec<T>>, mu: Vec<T>, c: Vec<Vec<T>>, cap: usize) -> Self {
        Self { mode: MultiMode::Mutation, lambda: BirthRates::Matrix(lambda), mu, c, cap, budget: DEFAULT_STATE_BUDGET }
    }

    pub fn cooperative(lambda: Vec<T>, mu: Vec<T>, c: Vec<Vec<T>>, cap: usize) -> Self {
        Self {
            mode: MultiMode::Cooperative,
            lambda: BirthRates::PerType(lambda),
            mu,
            c,
            cap,
            budget: DEFAULT_STATE_BUDGET,
        }
    }

    pub fn types(&self) -> usize {
        self.mu.len()
    }

    fn check(&self) -> Result<()> {
        let d = self.types();
        if d == 0 {
            return Err(QsdError::InvalidArgument("at least one type required".into()));
        }
        if self.cap == 0 {
            return Err(QsdError::InvalidArgument("cap must be at least 1".into()));
        }
        if self.c.len() != d || self.c.iter().any(|r| r.len() != d) {
            return Err(QsdError::Shape(format!("interaction matrix must be {d}x{d}")));
        }
        let finite = |v: T| v.is_finite();
        match (self.mode, &self.lambda) {
            (MultiMode::Mutation, BirthRates::Matrix(l)) => {
                if l.len() != d || l.iter().any(|r| r.len() != d) {
                    return Err(QsdError::Shape(format!("mutation matrix must be {d}x{d}")));
                }
                let pos = |v: &T| *v > T::zero() && finite(*v);
                if !l.iter().flatten().all(pos) || !self.mu.iter().all(pos) || !self.c.iter().flatten().all(pos) {
                    return Err(QsdError::InvalidArgument("mutation mode needs λ_ij, μ_i, c_ij > 0".into()));
                }
            }
            (MultiMode::Cooperative, BirthRates::PerType(l)) => {
                if l.len() != d {
                    return Err(QsdError::Shape(format!("need {d} per-type birth rates")));
                }
                let nonneg = |v: &T| *v >= T::zero() && finite(*v);
                if !l.iter().all(nonneg) || !self.mu.iter().all(nonneg) || !self.c.iter().flatten().all(nonneg) {
                    return Err(QsdError::InvalidArgument("cooperative mode needs non-negative rates".into()));
                }
                if (0..d).any(|i| !(self.c[i][i] > T::zero())) {
                    return Err(QsdError::InvalidArgument("cooperative mode needs c_ii > 0".into()));
                }
            }
            _ => return Err(QsdError::InvalidArgument("birth-rate shape does not match mode".into())),
        }
        Ok(())
    }

    /// Aggregate birth and death rates per type at `x`.
    pub fn type_rates(&self, x: &[usize]) -> (Vec<T>, Vec<T>) {
        let d = self.types();
        let xt: Vec<T> = x.iter().map(|&v| T::from_count(v)).collect();
        let mut births = Vec::with_capacity(d);
        let mut deaths = Vec::with_capacity(d);
        for i in 0..d {
            match &self.lambda {
                BirthRates::Matrix(l) => {
                    births.push((0..d).map(|j| l[j][i] * xt[j]).sum());
                    deaths.push(self.mu[i] * xt[i] + (0..d).map(|j| self.c[i][j] * (xt[i] * xt[j])).sum::<T>());
                }
                BirthRates::PerType(l) => {
                    births.push(
                        l[i] * xt[i] + (0..d).filter(|&j| j != i).map(|j| self.c[i][j] * (xt[i] * xt[j])).sum::<T>(),
                    );
                    deaths.push(self.mu[i] * xt[i] + self.c[i][i] * (xt[i] * xt[i]));
                }
            }
        }
        (births, deaths)
    }
}

/// Dense lexicographic indexing of the live states of a multi-type model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateIndex {
    types: usize,
    lo: usize,
    radix: usize,
    len: usize,
}

impl StateIndex {
    fn new(types: usize, lo: usize, cap: usize, budget: usize) -> Result<Self> {
        let radix = cap + 1 - lo;
        let full = radix.checked_pow(types as u32).unwrap_or(usize::MAX);
        // Mutation mode drops the all-zero state.
        let len = if lo == 0 { full.saturating_sub(1) } else { full };
        if len > budget || full == usize::MAX {
            return Err(QsdError::Budget { required: len, budget });
        }
        Ok(Self { types, lo, radix, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn index(&self, x: &[usize]) -> usize {
        let raw = x.iter().fold(0, |acc, &v| acc * self.radix + (v - self.lo));
        if self.lo == 0 {
            raw - 1
        } else {
            raw
        }
    }

    pub fn state(&self, idx: usize) -> Vec<usize> {
        let mut raw = if self.lo == 0 { idx + 1 } else { idx };
        let mut x = vec![0; self.types];
        for slot in x.iter_mut().rev() {
            *slot = raw % self.radix + self.lo;
            raw /= self.radix;
        }
        x
    }
}

/// Live-state enumeration used by [`build_multibd_mutation`] and
/// [`build_multibd_cooperative`].
pub fn state_index<T: Real>(spec: &MultiBDSpec<T>) -> Result<StateIndex> {
    let lo = match spec.mode {
        MultiMode::Mutation => 0,
        MultiMode::Cooperative => 1,
    };
    StateIndex::new(spec.types(), lo, spec.cap, spec.budget)
}

fn build_multi<T: Real>(spec: &MultiBDSpec<T>) -> Result<AbsorbedGenerator<T>> {
    spec.check()?;
    let idx = state_index(spec)?;
    let d = spec.types();
    let mut rows = Vec::with_capacity(idx.len());
    let mut kill = Vec::with_capacity(idx.len());
    for s in 0..idx.len() {
        let mut x = idx.state(s);
        let (births, deaths) = spec.type_rates(&x);
        let mut row = Vec::with_capacity(2 * d);
        let mut k = T::zero();
        for i in 0..d {
            if x[i] < spec.cap && births[i] > T::zero() {
                x[i] += 1;
                row.push((idx.index(&x), births[i]));
                x[i] -= 1;
            }
            if x[i] > 0 && deaths[i] > T::zero() {
                x[i] -= 1;
                let absorbed = match spec.mode {
                    MultiMode::Mutation => x.iter().all(|&v| v == 0),
                    MultiMode::Cooperative => x[i] == 0,
                };
                if absorbed {
                    k = k + deaths[i];
                } else {
                    row.push((idx.index(&x), deaths[i]));
                }
                x[i] += 1;
            }
        }
        rows.push(row);
        kill.push(k);
    }
    AbsorbedGenerator::from_sparse(rows, kill)
}

pub fn build_multibd_mutation<T: Real>(spec: &MultiBDSpec<T>) -> Result<AbsorbedGenerator<T>> {
    if spec.mode != MultiMode::Mutation {
        return Err(QsdError::InvalidArgument("spec is not in mutation mode".into()));
    }
    build_multi(spec)
}

pub fn build_multibd_cooperative<T: Real>(spec: &MultiBDSpec<T>) -> Result<AbsorbedGenerator<T>> {
    if spec.mode != MultiMode::Cooperative {
        return Err(QsdError::InvalidArgument("spec is not in cooperative mode".into()));
    }
    build_multi(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakCooperation<T> {
    pub holds: bool,
    /// `(1 - 1/d) max_{i≠j} (c_ij + c_ji)/2`.
    pub lhs: T,
    /// `1/β` with `β = Σ_j 1/c_jj`.
    pub inv_beta: T,
    pub margin: T,
}

pub fn check_weak_cooperation<T: Real>(spec: &MultiBDSpec<T>) -> Result<WeakCooperation<T>> {
    if spec.mode != MultiMode::Cooperative {
        return Err(QsdError::InvalidArgument("weak cooperation applies to cooperative mode".into()));
    }
    spec.check()?;
    let d = spec.types();
    let lhs = (T::one() - T::one() / T::from_count(d)) * max_symmetric_coupling(&spec.c);
    let inv_beta = inv_beta(&spec.c);
    let margin = inv_beta - lhs;
    Ok(WeakCooperation { holds: margin > T::zero(), lhs, inv_beta, margin })
}

fn max_symmetric_coupling<T: Real>(c: &[Vec<T>]) -> T {
    let d = c.len();
    let mut m = T::zero();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                m = m.max((c[i][j] + c[j][i]) / T::lit(2.0));
            }
        }
    }
    m
}

fn inv_beta<T: Real>(c: &[Vec<T>]) -> T {
    let beta: T = (0..c.len()).map(|j| T::one() / c[j][j]).sum();
    T::one() / beta
}

/// Birth/death sequences of a 1-D chain dominating `|X|`.
///
/// Mutation mode: `b_n = n d sup λ_ij`, `d_n = n inf μ_i + n² inf c_ij`.
/// Cooperative mode: `b_n = n max λ_i + n² (1 - 1/d) max_{i<j} (c_ij + c_ji)/2`,
/// `d_n = n min μ_i + n²/β`.
pub fn domination_rates<T: Real>(spec: &MultiBDSpec<T>) -> Result<(RateSeq<T>, RateSeq<T>)> {
    spec.check()?;
    let d = spec.types();
    let fmin = |v: &mut dyn Iterator<Item = T>| v.fold(T::infinity(), T::min);
    let fmax = |v: &mut dyn Iterator<Item = T>| v.fold(T::neg_infinity(), T::max);
    let mu_min = fmin(&mut spec.mu.iter().copied());
    Ok(match &spec.lambda {
        BirthRates::Matrix(l) => {
            let lam_sup = fmax(&mut l.iter().flatten().copied());
            let c_inf = fmin(&mut spec.c.iter().flatten().copied());
            (RateSeq::Poly(vec![T::zero(), T::from_count(d) * lam_sup]), RateSeq::Poly(vec![T::zero(), mu_min, c_inf]))
        }
        BirthRates::PerType(l) => {
            let lam_max = fmax(&mut l.iter().copied());
            let quad = (T::one() - T::one() / T::from_count(d)) * max_symmetric_coupling(&spec.c);
            (RateSeq::Poly(vec![T::zero(), lam_max, quad]), RateSeq::Poly(vec![T::zero(), mu_min, inv_beta(&spec.c)]))
        }
    })
}
