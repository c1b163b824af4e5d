//! Certificates for the Dobrushin-type minorization (A1) and the survival
//! comparison (A2), the explicit convergence constants they imply, and the
//! `S`-series test deciding the birth-death case.
//!
//! (A1): for some `t₀, c₁ > 0` and probability `ν`,
//! `P_x(X_{t₀} ∈ · | t₀ < τ_∂) ≥ c₁ ν` for every `x`.
//!
//! (A2): for some `c₂ > 0`, `P_ν(t < τ_∂) ≥ c₂ P_x(t < τ_∂)` for every `x, t`.
//!
//! Together they give `‖P_μ(X_t ∈ · | t < τ_∂) − α‖_TV ≤ 2 (1 − c₁c₂)^⌊t/t₀⌋`.

use serde::{Deserialize, Serialize};

use crate::chain::{AbsorbedGenerator, DistributionVector, UNDERFLOW_FLOOR};
use crate::error::{QsdError, Result};
use crate::models::BDSpec;
use crate::scalar::{self, Real};
use crate::spectral::{scaled_survival_step, SpectralTriple};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct CriteriaCertificate<T> {
    pub t0: T,
    pub nu: DistributionVector<T>,
    pub c1: T,
    pub c2: T,
    /// Time at which the (A2) ratio attained its minimum; `None` means the
    /// asymptotic value `ν(η)/max η` was the smallest.
    pub c2_argmin_t: Option<T>,
    pub c2_alpha: T,
    pub gamma_bound: T,
    #[serde(rename = "C_bound")]
    pub c_bound: T,
    /// Horizon of the (A2) evaluation grid.
    pub t_max: T,
}

impl<T: Real> CriteriaCertificate<T> {
    /// `1 − c₁c₂`.
    pub fn contraction(&self) -> T {
        T::one() - self.c1 * self.c2
    }

    /// `(1 − c₁c₂)^⌊t/t₀⌋`.
    pub fn decay_factor(&self, t: T) -> T {
        let k = (t / self.t0).floor();
        self.contraction().powf(k)
    }

    /// Contraction bound for conditioned laws started from `μ₁, μ₂`, given
    /// `c₂(μ₁)`, `c₂(μ₂)`, and their distance.
    pub fn lipschitz_bound(&self, t: T, c2_mu1: T, c2_mu2: T, initial_tv: T) -> T {
        self.decay_factor(t) * initial_tv / c2_mu1.min(c2_mu2)
    }
}

/// Largest measure dominated by every row (entrywise minimum on a finite space).
pub fn infimum_measure<T: Real>(rows: &[Vec<T>]) -> Result<Vec<T>> {
    let first = rows.first().ok_or_else(|| QsdError::InvalidArgument("empty family of measures".into()))?;
    let mut out = first.clone();
    for r in &rows[1..] {
        if r.len() != out.len() {
            return Err(QsdError::Shape("measures of different lengths".into()));
        }
        for (o, &v) in out.iter_mut().zip(r) {
            *o = o.min(v);
        }
    }
    if out.iter().any(|&v| !(v >= T::zero())) {
        return Err(QsdError::InvalidArgument("measures must be non-negative".into()));
    }
    Ok(out)
}

/// Builds `ν` and the maximal `c₁` for which the conditioned kernel at `t₀`
/// dominates `c₁ ν` row by row.
pub fn certify_a1<T: Real>(gen: &AbsorbedGenerator<T>, t0: T) -> Result<(DistributionVector<T>, T)> {
    if !(t0 > T::zero()) {
        return Err(QsdError::InvalidArgument("t0 must be positive".into()));
    }
    let k = gen.conditioned_kernel(t0)?;
    let rows = k.to_rows();
    let raw = infimum_measure(&rows)?;
    let c1 = scalar::sum(&raw);
    if !(c1 > T::zero()) {
        return Err(QsdError::A1Fails { t0: t0.as_f64() });
    }
    let nu = DistributionVector::normalize(raw)?;
    Ok((nu, c1.min(T::one())))
}

/// Scaled survival vectors `g_t = e^{λ₀t} P_t 1_E` on `{0, h, 2h, .., t_max}`,
/// closed by the uniform limit `η`.
#[derive(Debug, Clone)]
pub struct SurvivalProfile<T> {
    times: Vec<T>,
    scaled: Vec<Vec<T>>,
    eta: Vec<T>,
}

impl<T: Real> SurvivalProfile<T> {
    /// Fails with "extend t_max" unless `sup_x |g_{t_max}(x) − η(x)| ≤ 0.01 min η`.
    pub fn build(gen: &AbsorbedGenerator<T>, triple: &SpectralTriple<T>, t_max: T, grid_step: T) -> Result<Self> {
        if !(grid_step > T::zero()) || !(t_max >= grid_step) {
            return Err(QsdError::InvalidArgument(format!("need 0 < grid_step <= t_max, got {grid_step}, {t_max}")));
        }
        let steps = (t_max / grid_step).ceil().to_usize().unwrap_or(usize::MAX);
        let mut times = Vec::with_capacity(steps + 1);
        let mut scaled = Vec::with_capacity(steps + 1);
        let mut g = vec![T::one(); gen.n()];
        times.push(T::zero());
        scaled.push(g.clone());
        for k in 1..=steps {
            g = scaled_survival_step(gen, triple.lambda0, &g, grid_step)?;
            times.push(T::from_count(k) * grid_step);
            scaled.push(g.clone());
        }
        let err = scalar::max_abs_diff(&g, &triple.eta);
        let eta_min = triple.eta.iter().copied().fold(T::infinity(), T::min);
        if err > T::lit(0.01) * eta_min {
            return Err(QsdError::ExtendHorizon(format!(
                "sup |e^(λ₀t)P_x(t<τ) − η| = {err:e} at t = {} exceeds 0.01·min η = {:e}",
                times[steps],
                T::lit(0.01) * eta_min
            )));
        }
        Ok(Self { times, scaled, eta: triple.eta.clone() })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    /// `(t, P_μ(t<τ_∂) / max_x P_x(t<τ_∂))` along the grid.
    pub fn ratio_curve(&self, mu: &[T]) -> Vec<(T, T)> {
        self.times.iter().zip(&self.scaled).map(|(&t, g)| (t, scalar::dot(mu, g) / scalar::max_of(g))).collect()
    }

    /// `inf_t P_μ(t<τ_∂)/max_x P_x(t<τ_∂)` over the grid and `t = ∞`.
    pub fn c2_of(&self, mu: &[T]) -> (T, Option<T>) {
        let asymptotic = scalar::dot(mu, &self.eta) / scalar::max_of(&self.eta);
        self.ratio_curve(mu)
            .into_iter()
            .fold((asymptotic, None), |best, (t, r)| if r < best.0 { (r, Some(t)) } else { best })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C2Estimate<T> {
    pub value: T,
    pub argmin_t: Option<T>,
}

pub fn certify_a2<T: Real>(
    gen: &AbsorbedGenerator<T>,
    nu: &DistributionVector<T>,
    triple: &SpectralTriple<T>,
    t_max: T,
    grid_step: T,
) -> Result<C2Estimate<T>> {
    let profile = SurvivalProfile::build(gen, triple, t_max, grid_step)?;
    let (value, argmin_t) = profile.c2_of(nu.weights());
    Ok(C2Estimate { value, argmin_t })
}

/// `c₂(μ) = inf_{t, ρ} P_μ(t<τ_∂)/P_ρ(t<τ_∂)`; the inner supremum is attained at
/// Dirac masses.
pub fn c2_of_mu<T: Real>(
    gen: &AbsorbedGenerator<T>,
    mu: &DistributionVector<T>,
    triple: &SpectralTriple<T>,
    t_max: T,
    grid_step: T,
) -> Result<T> {
    Ok(certify_a2(gen, mu, triple, t_max, grid_step)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions<T> {
    /// Fixed `t₀`; `None` searches `{0.5, 1, 2, 4}/λ₀` for the largest `c₁c₂`.
    pub t0: Option<T>,
    /// Fixed (A2) horizon; `None` starts from a gap-based guess and doubles.
    pub t_max: Option<T>,
    /// Grid step is `t₀ / grid_divisions` (at least 4).
    pub grid_divisions: usize,
}

impl<T: Real> Default for CertifyOptions<T> {
    fn default() -> Self {
        Self { t0: None, t_max: None, grid_divisions: 4 }
    }
}

/// Certifies (A1) and (A2) and fills in every derived constant.
pub fn certify<T: Real>(
    gen: &AbsorbedGenerator<T>,
    triple: &SpectralTriple<T>,
    opts: &CertifyOptions<T>,
) -> Result<CriteriaCertificate<T>> {
    if opts.grid_divisions < 4 {
        return Err(QsdError::InvalidArgument("grid step must be at most t0/4".into()));
    }
    let candidates: Vec<T> = match opts.t0 {
        Some(t0) => vec![t0],
        None => [0.5, 1.0, 2.0, 4.0].iter().map(|&f| T::lit(f) / triple.lambda0).collect(),
    };
    let mut best: Option<CriteriaCertificate<T>> = None;
    let mut last_err = None;
    for t0 in candidates {
        match certify_at(gen, triple, t0, opts) {
            Ok(c) => {
                if best.as_ref().is_none_or(|b| c.c1 * c.c2 > b.c1 * b.c2) {
                    best = Some(c);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(QsdError::A1Fails { t0: f64::NAN }))
}

fn certify_at<T: Real>(
    gen: &AbsorbedGenerator<T>,
    triple: &SpectralTriple<T>,
    t0: T,
    opts: &CertifyOptions<T>,
) -> Result<CriteriaCertificate<T>> {
    let (nu, c1) = certify_a1(gen, t0)?;
    let step = t0 / T::from_count(opts.grid_divisions);
    let (profile, t_max) = match opts.t_max {
        Some(tm) => (SurvivalProfile::build(gen, triple, tm, step)?, tm),
        None => {
            let gap = triple.gap.unwrap_or(T::one());
            let mut tm = (T::lit(8.0) * t0).max(T::lit(10.0) / gap);
            let mut attempt = 0;
            loop {
                match SurvivalProfile::build(gen, triple, tm, step) {
                    Ok(p) => break (p, tm),
                    Err(QsdError::ExtendHorizon(_)) if attempt < 8 => {
                        tm = tm * T::lit(2.0);
                        attempt += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    };
    let (c2, c2_argmin_t) = profile.c2_of(nu.weights());
    if !(c2 > T::zero()) {
        return Err(QsdError::NotUnique(format!("(A2) constant vanishes at t0 = {t0}")));
    }
    let (c2_alpha, _) = profile.c2_of(triple.alpha.weights());
    let contraction = T::one() - c1 * c2;
    let gamma_bound = if contraction > T::zero() { -contraction.ln() / t0 } else { T::infinity() };
    Ok(CriteriaCertificate {
        t0,
        nu,
        c1,
        c2: c2.min(T::one()),
        c2_argmin_t,
        c2_alpha: c2_alpha.min(T::one()),
        gamma_bound,
        c_bound: T::lit(2.0),
        t_max,
    })
}

/// `2 (1 − c₁c₂)^⌊t/t₀⌋`.
pub fn explicit_bound<T: Real>(cert: &CriteriaCertificate<T>, t: T) -> Result<T> {
    if !(t >= T::zero()) {
        return Err(QsdError::InvalidArgument("t must be non-negative".into()));
    }
    Ok(cert.c_bound * cert.decay_factor(t))
}

/// `sup_{s>0} exp(−λ₀s − C e^{(λ₀−γ)s} / (1 − e^{−γs}))`, a guaranteed lower
/// bound on `c₂(α)` whenever `‖φ_t(μ) − α‖_TV ≤ C e^{−γt}` for all `μ, t`.
pub fn c2_alpha_lower_bound<T: Real>(c: T, gamma: T, lambda0: T) -> Result<T> {
    if !(c > T::zero() && gamma > T::zero() && lambda0 > T::zero())
        || !(c.is_finite() && gamma.is_finite() && lambda0.is_finite())
    {
        return Err(QsdError::InvalidArgument("C, γ and λ₀ must be positive and finite".into()));
    }
    let f = |log_s: T| -> T {
        let s = log_s.exp();
        let denom = -(-gamma * s).exp_m1();
        -lambda0 * s - c * ((lambda0 - gamma) * s).exp() / denom
    };
    // Coarse log-spaced scan, then golden section on the best bracket.
    let scale = (lambda0 + gamma).recip();
    let (lo, hi) = ((T::lit(1e-14) * scale).ln(), (T::lit(1e6) * scale).ln());
    let m = 4000usize;
    let h = (hi - lo) / T::from_count(m);
    let (mut kbest, mut fbest) = (0usize, T::neg_infinity());
    for k in 0..=m {
        let v = f(lo + h * T::from_count(k));
        if v > fbest {
            kbest = k;
            fbest = v;
        }
    }
    let mut a = lo + h * T::from_count(kbest.saturating_sub(1));
    let mut b = lo + h * T::from_count((kbest + 1).min(m));
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (b - a).abs() <= T::epsilon() * T::lit(4.0) * (a.abs() + b.abs()).max(T::one()) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    Ok(fbest.max(f1).max(f2).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesVerdict {
    Converged,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport<T> {
    /// First summation index (`z + 1`).
    pub first_k: usize,
    /// `S_K` for `K = first_k ..= K_max`.
    pub partial_sums: Vec<T>,
    pub verdict: SeriesVerdict,
    pub tail_bound: Option<T>,
}

impl<T: Real> SeriesReport<T> {
    /// `S_K`, or `None` outside the computed range.
    pub fn partial_sum(&self, k: usize) -> Option<T> {
        k.checked_sub(self.first_k).and_then(|i| self.partial_sums.get(i)).copied()
    }

    pub fn last(&self) -> T {
        *self.partial_sums.last().expect("non-empty")
    }
}

/// Consecutive increments above this floor count towards a divergence verdict.
pub const DIVERGENCE_INCREMENT: f64 = 1e-8;
pub const DIVERGENCE_RUN: usize = 200;

/// Partial sums of `Σ_{k>z} (1/(d_k α_k)) Σ_{l≥k} α_l` with
/// `α_k = Π_{i<k} b_i / Π_{i≤k} d_i`, and a convergence verdict.
///
/// The inner tail is `Σ_{l≥k} α_l/α_k = 1 + r_k + r_k r_{k+1} + ..` with
/// `r_i = b_i/d_{i+1}`, accumulated backwards in log space from `2 K_max`.
pub fn s_series<T: Real>(spec: &BDSpec<T>, k_max: usize, z: usize) -> Result<SeriesReport<T>> {
    if k_max < 10 {
        return Err(QsdError::InvalidArgument("K_max must be at least 10".into()));
    }
    if z + 1 > k_max {
        return Err(QsdError::InvalidArgument("cutoff z must be below K_max".into()));
    }
    let horizon = 2 * k_max + DIVERGENCE_RUN;
    let need = horizon + 1;
    for seq in [&spec.b, &spec.d] {
        if let Some(m) = seq.max_index() {
            if m < need {
                return Err(QsdError::InvalidArgument(format!(
                    "rate table covers k <= {m}, s_series needs k <= {need}"
                )));
            }
        }
    }
    let mut log_b = Vec::with_capacity(need + 1);
    let mut log_d = Vec::with_capacity(need + 1);
    log_b.push(T::nan());
    log_d.push(T::nan());
    for k in 1..=need {
        let (b, d) = (spec.b.eval(k)?, spec.d.eval(k)?);
        if b.is_nan() || d.is_nan() {
            return Err(QsdError::InvalidArgument(format!("NaN rate at k = {k}")));
        }
        if !(b > T::zero()) || !(d > T::zero()) {
            return Err(QsdError::InvalidArgument(format!("need b_k > 0 and d_k > 0 at k = {k}")));
        }
        log_b.push(b.ln());
        log_d.push(d.ln());
    }
    let log_r = |i: usize| log_b[i] - log_d[i + 1];
    // log R_k, R_k = Σ_{l≥k} α_l / α_k.
    let mut log_tail = vec![T::zero(); horizon + 1];
    let r_end = log_r(horizon).exp();
    log_tail[horizon] = if r_end < T::one() { -(T::one() - r_end).ln() } else { T::zero() };
    for k in (1..horizon).rev() {
        let x = log_r(k) + log_tail[k + 1];
        log_tail[k] = softplus(x);
    }
    let first_k = z + 1;
    let terms: Vec<T> = (first_k..=k_max).map(|k| (log_tail[k] - log_d[k]).exp()).collect();
    let mut partial_sums = Vec::with_capacity(terms.len());
    let mut acc = T::zero();
    for &t in &terms {
        acc = acc + t;
        partial_sums.push(acc);
    }
    let (verdict, tail_bound) = classify_series(&terms, first_k);
    Ok(SeriesReport { first_k, partial_sums, verdict, tail_bound })
}

fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn classify_series<T: Real>(terms: &[T], first_k: usize) -> (SeriesVerdict, Option<T>) {
    let n = terms.len();
    let last = terms[n - 1];
    if !last.is_finite() {
        return (SeriesVerdict::Diverging, None);
    }
    if last == T::zero() {
        return (SeriesVerdict::Converged, Some(T::zero()));
    }
    let k_last = first_k + n - 1;
    // Geometric tail: ratios bounded by ρ < 1 over the last quarter. A power
    // law k^{-p} has ratios near 1 - p/K, so K(1 - ρ) must be large as well.
    let q = (n / 4).max(2);
    let rho = terms[n - q..].windows(2).map(|w| w[1] / w[0]).fold(T::zero(), T::max);
    if rho < T::lit(0.999) && T::from_count(k_last) * (T::one() - rho) > T::lit(50.0) {
        return (SeriesVerdict::Converged, Some(last * rho / (T::one() - rho)));
    }
    // Power tail: local exponent ln(t_k / t_2k)/ln 2 over the last octave.
    let idx = |k: usize| k - first_k;
    let lo = (k_last / 4).max(first_k);
    let hi = k_last / 2;
    let mut p_min = T::infinity();
    let mut p_max = T::neg_infinity();
    for k in lo..=hi {
        let p = (terms[idx(k)] / terms[idx(2 * k)]).ln() / T::lit(2f64.ln());
        p_min = p_min.min(p);
        p_max = p_max.max(p);
    }
    if p_min > T::lit(1.05) {
        // Σ_{k>K} t_K (K/k)^p ≤ t_K K/(p-1); the exponent is halved towards 1
        // to absorb its drift beyond the measured octave.
        let kk = T::from_count(k_last);
        let p_safe = T::one() + (p_min - T::one()) / T::lit(2.0);
        return (SeriesVerdict::Converged, Some(last * kk / (p_safe - T::one())));
    }
    let run = DIVERGENCE_RUN.min(n);
    let sustained = terms[n - run..].iter().all(|&t| t > T::lit(DIVERGENCE_INCREMENT));
    if sustained && p_max <= T::lit(1.02) {
        return (SeriesVerdict::Diverging, None);
    }
    (SeriesVerdict::Inconclusive, None)
}

/// Smallest survival over all Dirac starts at `t₀` must stay above the
/// underflow floor for (A1) to be checkable.
pub fn a1_checkable<T: Real>(gen: &AbsorbedGenerator<T>, t0: T) -> Result<bool> {
    let s = gen.survival_vector(t0)?;
    Ok(s.iter().all(|&v| v.as_f64() > UNDERFLOW_FLOOR))
}
