mod common;

use common::{dense, expm, logistic, t2, tv};
use qsdlab_core::{
    certify, eta_limit_profile, qprocess_generator, qprocess_transition, solve_spectral, spectrum_report,
    AbsorbedGenerator, CertifyOptions, DistributionVector, QsdError,
};

/// Eigenvalues of `L` on `E` sorted by decreasing real part (nalgebra oracle).
fn oracle_spectrum(g: &AbsorbedGenerator<f64>) -> Vec<(f64, f64)> {
    let mut ev: Vec<(f64, f64)> = dense(g).complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
    ev.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    ev
}

#[test]
fn t2_triple_closed_form() {
    let s = solve_spectral(&t2(), 1e-12).unwrap();
    let r2 = 2f64.sqrt();
    assert!((s.lambda0 - (2.0 - r2)).abs() < 1e-12);
    assert!((s.alpha.weights()[0] - (2.0 - r2)).abs() < 1e-12);
    assert!((s.alpha.weights()[1] - (r2 - 1.0)).abs() < 1e-12);
    assert!((s.eta[0] - (2.0 + r2) / 4.0).abs() < 1e-12);
    assert!((s.eta[1] - (r2 + 1.0) / 2.0).abs() < 1e-12);
    assert!((s.gap.unwrap() - 2.0 * r2).abs() < 1e-10);
    let (ra, re) = s.residuals(&t2());
    assert!(ra <= 1e-10 && re <= 1e-10);
}

#[test]
fn logistic_30_agrees_with_dense_eigensolver() {
    let g = logistic(30);
    let s = solve_spectral(&g, 1e-10).unwrap();
    let ev = oracle_spectrum(&g);
    assert!((s.lambda0 + ev[0].0).abs() < 1e-10 * ev[0].0.abs().max(1.0));
    assert!((s.gap.unwrap() - (ev[0].0 - ev[1].0)).abs() < 1e-8);
    let (ra, re) = s.residuals(&g);
    assert!(ra <= 1e-10 && re <= 1e-10, "{ra:e} {re:e}");
    assert!(s.alpha.weights().iter().all(|&a| a > 0.0));
    assert!(s.eta.iter().all(|&e| e > 0.0));
    assert!((s.alpha.integrate(&s.eta) - 1.0).abs() < 1e-12);
}

#[test]
fn alpha_is_a_fixed_point_of_conditioning() {
    let g = logistic(30);
    let s = solve_spectral(&g, 1e-10).unwrap();
    for t in [0.5, 3.0, 20.0] {
        let c = g.condition(&s.alpha, t).unwrap();
        assert!(tv(c.weights(), s.alpha.weights()) < 1e-10);
        let surv = g.survival_probability(&s.alpha, t).unwrap();
        assert!((surv * (s.lambda0 * t).exp() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn reducible_chain_with_tied_top_is_rejected() {
    // Two non-communicating copies of the same state.
    let g = AbsorbedGenerator::from_dense(&[vec![0.0, 0.0], vec![0.0, 0.0]], vec![1.0, 1.0]).unwrap();
    match solve_spectral(&g, 1e-10) {
        Err(QsdError::NotUnique(_)) => {}
        other => panic!("expected NotUnique, got {other:?}"),
    }
}

#[test]
fn eta_profile_decays_at_the_gap() {
    let g = t2();
    let s = solve_spectral(&g, 1e-12).unwrap();
    let e = eta_limit_profile(&g, &s, &[5.0, 10.0]).unwrap();
    let gap = s.gap.unwrap();
    assert!(e[1] / e[0] <= (-gap * 5.0).exp() * 3.0);
    assert!(e[1] / e[0] >= (-gap * 5.0).exp() / 3.0);
    let one = AbsorbedGenerator::from_dense(&[vec![0.0]], vec![0.3]).unwrap();
    let s1 = solve_spectral(&one, 1e-12).unwrap();
    for v in eta_limit_profile(&one, &s1, &[0.0, 1.0, 50.0]).unwrap() {
        assert!(v < 1e-12);
    }
}

#[test]
fn qprocess_invariants_and_conjugation() {
    let g = logistic(30);
    let s = solve_spectral(&g, 1e-10).unwrap();
    let q = qprocess_generator(&g, &s).unwrap();
    for r in q.generator.row_sums() {
        assert!(r.abs() <= 1e-12 * 100.0_f64.max(1.0), "{r:e}");
    }
    let bl = q.generator.vec_mul(q.beta.weights());
    assert!(bl.iter().map(|x| x.abs()).sum::<f64>() <= 1e-10);
    let n = g.n();
    let lt = nalgebra::DMatrix::from_fn(n, n, |i, j| q.generator[(i, j)]);
    for t in [0.5, 1.0, 5.0] {
        let p = qprocess_transition(&g, &s, t).unwrap();
        for r in p.row_sums() {
            assert!((r - 1.0).abs() <= 1e-10);
        }
        let bp = p.vec_mul(q.beta.weights());
        assert!(tv(&bp, q.beta.weights()) <= 1e-10);
        let oracle = (&lt * t).exp();
        for i in 0..n {
            for j in 0..n {
                assert!((p[(i, j)] - oracle[(i, j)]).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn t2_qprocess_closed_form() {
    let g = t2();
    let s = solve_spectral(&g, 1e-12).unwrap();
    let q = qprocess_generator(&g, &s).unwrap();
    assert!((q.beta.weights()[0] - 0.5).abs() < 1e-12);
    assert!((q.beta.weights()[1] - 0.5).abs() < 1e-12);
    let p = qprocess_transition(&g, &s, 1.0).unwrap();
    let oracle = {
        let pt = expm(&g, 1.0);
        let e = &s.eta;
        nalgebra::DMatrix::from_fn(2, 2, |i, j| s.lambda0.exp() * pt[(i, j)] * e[j] / e[i])
    };
    for i in 0..2 {
        for j in 0..2 {
            assert!((p[(i, j)] - oracle[(i, j)]).abs() < 1e-12);
        }
    }
    assert_eq!(qprocess_transition(&g, &s, 0.0).unwrap(), qsdlab_core::Matrix::identity(2));
}

#[test]
fn trichotomy_on_certified_chains() {
    for g in [t2(), logistic(30)] {
        let s = solve_spectral(&g, 1e-10).unwrap();
        let cert = certify(&g, &s, &CertifyOptions::default()).unwrap();
        let rep = spectrum_report(&g, &s, cert.gamma_bound).unwrap();
        assert!(rep.trichotomy_holds);
        let oracle = oracle_spectrum(&g);
        assert_eq!(rep.eigenvalues.len(), oracle.len());
        for (e, o) in rep.eigenvalues.iter().zip(&oracle) {
            assert!((e.re - o.0).abs() < 1e-8 * o.0.abs().max(1.0));
        }
        for e in &rep.eigenvalues[1..] {
            assert!(e.re <= -s.lambda0 - cert.gamma_bound + 1e-9);
        }
    }
}

#[test]
fn iterative_path_matches_dense_path() {
    let g = logistic(40);
    let dense = solve_spectral(&g, 1e-10).unwrap();
    let opts = qsdlab_core::SpectralOptions { dense_limit: 10, ..qsdlab_core::SpectralOptions::with_tol(1e-10) };
    let it = qsdlab_core::solve_spectral_with(&g, &opts).unwrap();
    assert!((it.lambda0 - dense.lambda0).abs() < 1e-10);
    assert!(tv(it.alpha.weights(), dense.alpha.weights()) < 1e-8);
    let gap = it.gap.unwrap();
    assert!(gap > 0.0 && gap <= dense.gap.unwrap() * (1.0 + 1e-6));
}

#[test]
fn triple_json_round_trip() {
    let s = solve_spectral(&logistic(10), 1e-10).unwrap();
    let text = serde_json::to_string(&s).unwrap();
    let back: qsdlab_core::Triple = serde_json::from_str(&text).unwrap();
    assert_eq!(s, back);
    let _ = DistributionVector::<f64>::uniform(3);
}
