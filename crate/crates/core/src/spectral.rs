//! Quasi-stationary triple `(λ₀, α, η)`, the Q-process, and spectrum checks.
//!
//! `α` is the left Perron vector of the sub-generator `L` on `E`
//! (`α L = -λ₀ α`, total mass 1) and `η` the right one (`L η = -λ₀ η`),
//! scaled so that `α(η) = 1`. The Q-process is the Doob transform of the
//! chain by `η`: `L̃ = λ₀ I + D_η⁻¹ L D_η`, with invariant law `β = η α`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::chain::{AbsorbedGenerator, DistributionVector};
use crate::error::{QsdError, Result};
use crate::linalg::{Lu, Matrix};
use crate::scalar::{self, Real};

/// Relative separation below which the top eigenvalue is treated as degenerate.
pub const SIMPLICITY_GAP: f64 = 1e-8;
/// Slack allowed when classifying eigenvalues against the trichotomy bound.
pub const TRICHOTOMY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct SpectralTriple<T> {
    pub lambda0: T,
    pub alpha: DistributionVector<T>,
    pub eta: Vec<T>,
    /// Distance from `-λ₀` to the next real part; `None` for a single state.
    pub gap: Option<T>,
}

impl<T: Real> SpectralTriple<T> {
    /// `(‖αL + λ₀α‖₁, ‖Lη + λ₀η‖_∞)`.
    pub fn residuals(&self, gen: &AbsorbedGenerator<T>) -> (T, T) {
        let al = gen.apply_left(self.alpha.weights());
        let ra = al.iter().zip(self.alpha.weights()).map(|(&a, &b)| (a + self.lambda0 * b).abs()).sum();
        let le = gen.apply_right(&self.eta);
        let re = le.iter().zip(&self.eta).map(|(&a, &b)| (a + self.lambda0 * b).abs()).fold(T::zero(), T::max);
        (ra, re)
    }

    /// `β(x) = η(x) α(x)`.
    pub fn beta(&self) -> Vec<T> {
        self.alpha.weights().iter().zip(&self.eta).map(|(&a, &e)| a * e).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions<T> {
    /// Residual tolerance for `α` and `η`.
    pub tol: T,
    /// Chains with more states use power iteration.
    pub dense_limit: usize,
    pub max_iter: usize,
}

impl<T: Real> SpectralOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        Self { tol, dense_limit: 512, max_iter: 2_000_000 }
    }
}

/// Computes `(λ₀, α, η, γ)` for a validated generator.
pub fn solve_spectral<T: Real>(gen: &AbsorbedGenerator<T>, tol: T) -> Result<SpectralTriple<T>> {
    solve_spectral_with(gen, &SpectralOptions::with_tol(tol))
}

pub fn solve_spectral_with<T: Real>(
    gen: &AbsorbedGenerator<T>,
    opts: &SpectralOptions<T>,
) -> Result<SpectralTriple<T>> {
    gen.validate()?;
    let triple = if gen.n() <= opts.dense_limit { dense_solve(gen, opts)? } else { iterative_solve(gen, opts)? };
    let (ra, re) = triple.residuals(gen);
    let scale = T::one().max(gen.uniformization_rate()) * T::lit(1e-14);
    if ra > opts.tol.max(scale) || re > opts.tol.max(scale) {
        return Err(QsdError::NoConvergence(format!("eigen-residuals {ra:e} / {re:e} above tolerance {}", opts.tol)));
    }
    Ok(triple)
}

fn sort_by_real_desc<T: Real>(ev: &mut [Complex<T>]) {
    ev.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.abs().partial_cmp(&b.im.abs()).unwrap_or(std::cmp::Ordering::Equal))
    });
}

fn check_simple<T: Real>(top: T, second: T) -> Result<()> {
    let sep = top - second;
    if sep <= T::lit(SIMPLICITY_GAP) * top.abs().max(T::epsilon()) {
        return Err(QsdError::NotUnique(format!("top real parts {top} and {second} coincide")));
    }
    Ok(())
}

fn dense_solve<T: Real>(gen: &AbsorbedGenerator<T>, opts: &SpectralOptions<T>) -> Result<SpectralTriple<T>> {
    let n = gen.n();
    let l = gen.sub_generator();
    let mut ev = l.eigenvalues()?;
    sort_by_real_desc(&mut ev);
    let top = ev[0];
    if top.im != T::zero() {
        return Err(QsdError::NotUnique("leading eigenvalue is not real".into()));
    }
    let gap = if n > 1 {
        check_simple(top.re, ev[1].re)?;
        Some(top.re - ev[1].re)
    } else {
        None
    };
    // Shift slightly to the right of the top eigenvalue so the solve stays
    // well conditioned while converging at rate ~1e-3 per iteration.
    let delta =
        gap.map_or(T::one(), |g| g * T::lit(1e-3)).max(T::epsilon() * T::lit(16.0) * top.re.abs().max(T::one()));
    let mut shifted = l.clone();
    for i in 0..n {
        shifted[(i, i)] = shifted[(i, i)] - (top.re + delta);
    }
    let lu = Lu::factor(&shifted)?;
    let alpha = inverse_iteration(n, opts, |v| lu.solve_left(v), scalar::sum)?;
    let eta = inverse_iteration(n, opts, |v| lu.solve(v), scalar::max_of)?;
    finish(gen, alpha, eta, gap)
}

/// Inverse iteration from a positive start, sign-fixed and scaled by `norm`.
fn inverse_iteration<T: Real>(
    n: usize,
    opts: &SpectralOptions<T>,
    mut solve: impl FnMut(&[T]) -> Result<Vec<T>>,
    norm: fn(&[T]) -> T,
) -> Result<Vec<T>> {
    let mut v = vec![T::one() / T::from_count(n); n];
    for _ in 0..200 {
        let mut w = solve(&v)?;
        let s: T = scalar::sum(&w);
        if s < T::zero() {
            w.iter_mut().for_each(|x| *x = -*x);
        }
        let m = norm(&w);
        if !(m > T::zero()) || !m.is_finite() {
            return Err(QsdError::NoConvergence("inverse iteration lost positivity".into()));
        }
        w.iter_mut().for_each(|x| *x = *x / m);
        let change = scalar::l1_diff(&w, &v);
        v = w;
        if change <= opts.tol * T::lit(1e-3) || change <= T::epsilon() * T::from_count(4 * n) {
            break;
        }
    }
    Ok(v)
}

fn finish<T: Real>(
    gen: &AbsorbedGenerator<T>,
    alpha: Vec<T>,
    eta: Vec<T>,
    gap: Option<T>,
) -> Result<SpectralTriple<T>> {
    let alpha: Vec<T> = alpha.into_iter().map(|x| x.max(T::zero())).collect();
    let eta: Vec<T> = eta.into_iter().map(|x| x.max(T::zero())).collect();
    let alpha = DistributionVector::normalize(alpha)?;
    let a_eta = alpha.integrate(&eta);
    if !(a_eta > T::zero()) {
        return Err(QsdError::NotUnique("α(η) vanishes".into()));
    }
    let eta: Vec<T> = eta.into_iter().map(|x| x / a_eta).collect();
    // Two-sided Rayleigh quotient; α(η) = 1.
    let lambda0 = -alpha.integrate(&gen.apply_right(&eta));
    Ok(SpectralTriple { lambda0, alpha, eta, gap })
}

fn iterative_solve<T: Real>(gen: &AbsorbedGenerator<T>, opts: &SpectralOptions<T>) -> Result<SpectralTriple<T>> {
    let n = gen.n();
    // Lazy uniformization P = I + L/(2Λ) keeps the spectrum in Re ≥ 0.
    let lam2 = gen.uniformization_rate() * T::lit(2.0);
    let step_left = |v: &[T]| -> Vec<T> {
        let lv = gen.apply_left(v);
        v.iter().zip(lv).map(|(&a, b)| a + b / lam2).collect()
    };
    let step_right = |w: &[T]| -> Vec<T> {
        let lw = gen.apply_right(w);
        w.iter().zip(lw).map(|(&a, b)| a + b / lam2).collect()
    };

    let mut alpha = vec![T::one() / T::from_count(n); n];
    let mut converged = false;
    for it in 0..opts.max_iter {
        let next = step_left(&alpha);
        let m = scalar::sum(&next);
        alpha = next.into_iter().map(|x| x / m).collect();
        if it % 64 == 0 {
            let rate = scalar::dot(&alpha, gen.kill());
            let res: T = gen.apply_left(&alpha).iter().zip(&alpha).map(|(&a, &b)| (a + rate * b).abs()).sum();
            if res <= opts.tol * T::lit(0.1) {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(QsdError::NoConvergence("left power iteration".into()));
    }
    let lambda_est = scalar::dot(&alpha, gen.kill());

    let mut eta = vec![T::one(); n];
    converged = false;
    for it in 0..opts.max_iter {
        let next = step_right(&eta);
        let m = scalar::max_of(&next);
        eta = next.into_iter().map(|x| x / m).collect();
        if it % 64 == 0 {
            let res = gen
                .apply_right(&eta)
                .iter()
                .zip(&eta)
                .map(|(&a, &b)| (a + lambda_est * b).abs())
                .fold(T::zero(), T::max);
            if res * scalar::dot(&alpha, &eta).recip() <= opts.tol * T::lit(0.1) {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(QsdError::NoConvergence("right power iteration".into()));
    }

    // Second eigenvalue modulus from the deflated iteration x ← P x − ρ η α(x).
    let a_eta = scalar::dot(&alpha, &eta);
    let mut x: Vec<T> = (0..n).map(|i| if i % 2 == 0 { T::one() } else { -T::one() }).collect();
    let deflate = |x: &mut Vec<T>| {
        let c = scalar::dot(&alpha, x) / a_eta;
        for (xi, &ei) in x.iter_mut().zip(&eta) {
            *xi = *xi - c * ei;
        }
    };
    deflate(&mut x);
    let iters = opts.max_iter.min(20_000);
    let burn = iters / 2;
    let mut log_growth = T::zero();
    for it in 0..iters {
        let mut y = step_right(&x);
        deflate(&mut y);
        let nx = x.iter().map(|v| v.abs()).fold(T::zero(), T::max);
        let ny = y.iter().map(|v| v.abs()).fold(T::zero(), T::max);
        if ny == T::zero() || nx == T::zero() {
            log_growth = T::neg_infinity();
            break;
        }
        if it >= burn {
            log_growth = log_growth + (ny / nx).ln();
        }
        x = y.into_iter().map(|v| v / ny).collect();
    }
    let r2 = (log_growth / T::from_count(iters - burn)).exp();
    let top = -lambda_est;
    let second = lam2 * (r2 - T::one());
    let gap = if n > 1 {
        check_simple(top, second)?;
        Some(top - second)
    } else {
        None
    };
    finish(gen, alpha, eta, gap)
}

/// `sup_x |e^{λ₀t} P_x(t < τ_∂) − η(x)|` along an increasing grid.
pub fn eta_limit_profile<T: Real>(
    gen: &AbsorbedGenerator<T>,
    triple: &SpectralTriple<T>,
    t_grid: &[T],
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(t_grid.len());
    let mut g = vec![T::one(); gen.n()];
    let mut last = T::zero();
    for &t in t_grid {
        if t < last {
            return Err(QsdError::InvalidArgument("time grid must be increasing".into()));
        }
        g = scaled_survival_step(gen, triple.lambda0, &g, t - last)?;
        last = t;
        out.push(scalar::max_abs_diff(&g, &triple.eta));
    }
    Ok(out)
}

/// `g ↦ e^{λ₀ dt} P_dt g` without intermediate underflow.
pub(crate) fn scaled_survival_step<T: Real>(gen: &AbsorbedGenerator<T>, lambda0: T, g: &[T], dt: T) -> Result<Vec<T>> {
    let gmax = scalar::max_of(g);
    let (w, log_ratio) = gen.propagate_right(g, dt)?;
    let s = gmax * (log_ratio + lambda0 * dt).exp();
    Ok(w.into_iter().map(|x| x * s).collect())
}

/// The Q-process: conservative generator on `E` and its invariant law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct QProcess<T> {
    pub generator: Matrix<T>,
    pub beta: DistributionVector<T>,
}

fn check_eta<T: Real>(triple: &SpectralTriple<T>) -> Result<()> {
    if let Some(i) = triple.eta.iter().position(|&e| !(e > T::zero())) {
        return Err(QsdError::InvalidArgument(format!("η vanishes at state {i}; the Q-process is undefined")));
    }
    Ok(())
}

/// `L̃(x,y) = L(x,y) η(y)/η(x)` off the diagonal, `L̃(x,x) = λ₀ + L(x,x)`.
pub fn qprocess_generator<T: Real>(gen: &AbsorbedGenerator<T>, triple: &SpectralTriple<T>) -> Result<QProcess<T>> {
    check_eta(triple)?;
    let n = gen.n();
    let eta = &triple.eta;
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for &(j, q) in gen.sparse_row(i) {
            m[(i, j)] = q * eta[j] / eta[i];
        }
        m[(i, i)] = triple.lambda0 - gen.outflow(i);
    }
    let beta = DistributionVector::normalize(triple.beta())?;
    Ok(QProcess { generator: m, beta })
}

/// `P̃_t(x,y) = e^{λ₀t} η(y)/η(x) P_t(x,y)`.
pub fn qprocess_transition<T: Real>(gen: &AbsorbedGenerator<T>, triple: &SpectralTriple<T>, t: T) -> Result<Matrix<T>> {
    check_eta(triple)?;
    let mut p = gen.transition_matrix(t)?;
    let e = (triple.lambda0 * t).exp();
    for i in 0..gen.n() {
        let ei = triple.eta[i];
        for (j, x) in p.row_mut(i).iter_mut().enumerate() {
            *x = *x * e * triple.eta[j] / ei;
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenClass {
    /// The simple top eigenvalue `-λ₀`.
    Top,
    /// `Re λ ≤ -λ₀ - γ_bound`.
    Bounded,
    /// Above the bound: only possible through a bug or an invalid certificate.
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedEigenvalue<T> {
    pub re: T,
    pub im: T,
    pub class: EigenClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport<T> {
    pub lambda0: T,
    pub gamma_bound: T,
    pub eigenvalues: Vec<ClassifiedEigenvalue<T>>,
    /// Complex pairs present; classified on real parts only.
    pub complex_flagged: bool,
    pub trichotomy_holds: bool,
}

/// Orders the spectrum of `L` on `E` and checks every non-top eigenvalue
/// against `-λ₀ - γ_bound`.
pub fn spectrum_report<T: Real>(
    gen: &AbsorbedGenerator<T>,
    triple: &SpectralTriple<T>,
    gamma_bound: T,
) -> Result<SpectrumReport<T>> {
    let mut ev = gen.sub_generator().eigenvalues()?;
    sort_by_real_desc(&mut ev);
    let limit = -triple.lambda0 - gamma_bound + T::lit(TRICHOTOMY_SLACK);
    let eigenvalues: Vec<_> = ev
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let class = if k == 0 {
                EigenClass::Top
            } else if z.re <= limit {
                EigenClass::Bounded
            } else {
                EigenClass::Violation
            };
            ClassifiedEigenvalue { re: z.re, im: z.im, class }
        })
        .collect();
    let top_ok = (ev[0].re + triple.lambda0).abs() <= T::lit(1e-8) * triple.lambda0.abs().max(T::one());
    Ok(SpectrumReport {
        lambda0: triple.lambda0,
        gamma_bound,
        complex_flagged: ev.iter().any(|z| z.im != T::zero()),
        trichotomy_holds: top_ok && eigenvalues.iter().all(|e| e.class != EigenClass::Violation),
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2() -> AbsorbedGenerator<f64> {
        AbsorbedGenerator::from_dense(&[vec![0.0, 1.0], vec![2.0, 0.0]], vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn single_state_triple() {
        let g = AbsorbedGenerator::<f64>::from_dense(&[vec![0.0]], vec![0.4]).unwrap();
        let s = solve_spectral(&g, 1e-10).unwrap();
        assert!((s.lambda0 - 0.4).abs() < 1e-15);
        assert_eq!(s.alpha.weights(), &[1.0]);
        assert!((s.eta[0] - 1.0).abs() < 1e-15);
        assert_eq!(s.gap, None);
        let q = qprocess_generator(&g, &s).unwrap();
        assert!(q.generator[(0, 0)].abs() < 1e-15);
        assert_eq!(q.beta.weights(), &[1.0]);
        let prof = eta_limit_profile(&g, &s, &[0.0, 1.0, 10.0]).unwrap();
        assert!(prof.iter().all(|&e| e < 1e-12));
    }

    #[test]
    fn t2_closed_form() {
        let s = solve_spectral(&t2(), 1e-10).unwrap();
        let r2 = 2f64.sqrt();
        assert!((s.lambda0 - (2.0 - r2)).abs() < 1e-13);
        assert!((s.alpha.weights()[0] - (2.0 - r2)).abs() < 1e-13);
        assert!((s.alpha.weights()[1] - (r2 - 1.0)).abs() < 1e-13);
        assert!((s.eta[0] - (2.0 + r2) / 4.0).abs() < 1e-13);
        assert!((s.eta[1] - (r2 + 1.0) / 2.0).abs() < 1e-13);
        assert!((s.gap.unwrap() - 2.0 * r2).abs() < 1e-13);
        let b = s.beta();
        assert!((b[0] - 0.5).abs() < 1e-13 && (b[1] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn degenerate_top_rejected() {
        // Two disconnected identical states.
        let g = AbsorbedGenerator::from_dense(&[vec![0.0, 0.0], vec![0.0, 0.0]], vec![1.0, 1.0]).unwrap();
        assert!(matches!(solve_spectral(&g, 1e-10), Err(QsdError::NotUnique(_))));
    }

    #[test]
    fn zero_eta_blocks_qprocess() {
        let g = t2();
        let mut s = solve_spectral(&g, 1e-10).unwrap();
        s.eta[1] = 0.0;
        assert!(qprocess_generator(&g, &s).is_err());
        assert!(qprocess_transition(&g, &s, 1.0).is_err());
    }

    #[test]
    fn qprocess_rows_conserve() {
        let g = t2();
        let s = solve_spectral(&g, 1e-10).unwrap();
        let q = qprocess_generator(&g, &s).unwrap();
        for r in q.generator.row_sums() {
            assert!(r.abs() < 1e-12);
        }
        let p = qprocess_transition(&g, &s, 0.0).unwrap();
        assert_eq!(p, Matrix::identity(2));
    }

    #[test]
    fn alpha_start_has_flat_profile() {
        let g = t2();
        let s = solve_spectral(&g, 1e-10).unwrap();
        for t in [0.5, 3.0, 12.0] {
            let surv = g.survival_probability(&s.alpha, t).unwrap();
            assert!(((s.lambda0 * t).exp() * surv - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn t2_spectrum_report() {
        let g = t2();
        let s = solve_spectral(&g, 1e-10).unwrap();
        let rep = spectrum_report(&g, &s, 0.5).unwrap();
        assert!(rep.trichotomy_holds);
        assert_eq!(rep.eigenvalues[0].class, EigenClass::Top);
        assert!((rep.eigenvalues[1].re + 2.0 + 2f64.sqrt()).abs() < 1e-13);
        // A bound larger than the true gap must be flagged.
        let bad = spectrum_report(&g, &s, 3.0).unwrap();
        assert!(!bad.trichotomy_holds);
    }

    #[test]
    fn f32_instantiation_solves_t2() {
        let g = AbsorbedGenerator::<f32>::from_dense(&[vec![0.0, 1.0], vec![2.0, 0.0]], vec![1.0, 0.0]).unwrap();
        let s = solve_spectral(&g, 1e-4).unwrap();
        assert!((s.lambda0 - (2.0 - 2f32.sqrt())).abs() < 1e-5);
    }
}
