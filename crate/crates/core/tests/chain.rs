mod common;

use common::{expm, normalized, t2, tv};
use proptest::prelude::*;
use qsdlab_core::{tv_distance, AbsorbedGenerator, DistributionVector, Matrix, SurvivalCurve};

fn random_generator() -> impl Strategy<Value = AbsorbedGenerator<f64>> {
    (1usize..=8).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..3.0], n), n),
            prop::collection::vec(0.05f64..2.0, n),
        )
            .prop_map(move |(mut rates, kill)| {
                for (i, r) in rates.iter_mut().enumerate() {
                    r[i] = 0.0;
                }
                AbsorbedGenerator::from_dense(&rates, kill).unwrap()
            })
    })
}

fn random_law(n: usize) -> impl Strategy<Value = DistributionVector<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| DistributionVector::normalize(w).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn semigroup_property(g in random_generator()) {
        for s in [0.1, 1.0, 3.0] {
            for t in [0.1, 1.0, 3.0] {
                let lhs = g.transition_matrix(s).unwrap().matmul(&g.transition_matrix(t).unwrap());
                let rhs = g.transition_matrix(s + t).unwrap();
                prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10);
            }
        }
    }

    #[test]
    fn survival_is_non_increasing(g in random_generator(), seed in 0.0f64..1.0) {
        let n = g.n();
        let w: Vec<f64> = (0..n).map(|i| 1.0 + ((i as f64 + seed) * 7.3).sin().abs()).collect();
        let mu = DistributionVector::normalize(w).unwrap();
        let times: Vec<f64> = (0..40).map(|k| k as f64 * 0.25).collect();
        let c = SurvivalCurve::of_chain(&g, &mu, times).unwrap();
        for w in c.values.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn conditioning_matches_dense_exponential(g in random_generator().prop_filter("small", |g| g.n() <= 5), seed in any::<u64>()) {
        let n = g.n();
        let w: Vec<f64> = (0..n).map(|i| 0.1 + ((seed >> (i * 8)) & 0xff) as f64).collect();
        let mu = DistributionVector::normalize(w).unwrap();
        for t in [0.5, 1.0] {
            let p = expm(&g, t);
            let row: Vec<f64> = (0..n).map(|j| (0..n).map(|i| mu.weights()[i] * p[(i, j)]).sum()).collect();
            let oracle = normalized(&row);
            let got = g.condition(&mu, t).unwrap();
            prop_assert!(tv(got.weights(), &oracle) <= 1e-12);
        }
    }

    #[test]
    fn transition_matches_dense_exponential(g in random_generator(), t in 0.0f64..5.0) {
        let p = g.transition_matrix(t).unwrap();
        let q = expm(&g, t);
        for i in 0..g.n() {
            for j in 0..g.n() {
                prop_assert!((p[(i, j)] - q[(i, j)]).abs() <= 1e-11);
            }
        }
    }

    #[test]
    fn tv_is_a_metric(a in random_law(4), b in random_law(4), c in random_law(4)) {
        let (a, b, c) = (a.weights(), b.weights(), c.weights());
        let ab = tv_distance(a, b).unwrap();
        prop_assert_eq!(ab, tv_distance(b, a).unwrap());
        prop_assert!(ab <= tv_distance(a, c).unwrap() + tv_distance(c, b).unwrap() + 1e-15);
        prop_assert!(ab <= 2.0 + 1e-15);
        prop_assert_eq!(tv_distance(a, a).unwrap(), 0.0);
    }

    #[test]
    fn conditional_semigroup_composes(g in random_generator(), law in random_law(8)) {
        let n = g.n();
        let mu = DistributionVector::normalize(law.weights()[..n].to_vec()).unwrap();
        let horizon = 4.0;
        let direct = g.conditional_semigroup_apply(&mu, 0.5, 3.0, horizon).unwrap();
        let mid = g.conditional_semigroup_apply(&mu, 0.5, 1.75, horizon).unwrap();
        let composed = g.conditional_semigroup_apply(&mid, 1.75, 3.0, horizon).unwrap();
        prop_assert!(tv(direct.weights(), composed.weights()) <= 1e-10);
    }
}

#[test]
fn conditional_semigroup_on_t2_matches_reweighting_formula() {
    let g = t2();
    let x = DistributionVector::dirac(2, 0);
    let got = g.conditional_semigroup_apply(&x, 0.0, 1.0, 5.0).unwrap();
    let p1 = expm(&g, 1.0);
    let p4 = expm(&g, 4.0);
    let w4: Vec<f64> = (0..2).map(|i| p4[(i, 0)] + p4[(i, 1)]).collect();
    let oracle = normalized(&[p1[(0, 0)] * w4[0], p1[(0, 1)] * w4[1]]);
    assert!(tv(got.weights(), &oracle) < 1e-13);
    // The horizon-conditioned law at T is the plain conditioned law.
    for i in 0..2 {
        let x = DistributionVector::dirac(2, i);
        let a = g.conditional_semigroup_apply(&x, 0.0, 3.0, 3.0).unwrap();
        let b = g.condition(&x, 3.0).unwrap();
        assert!(tv(a.weights(), b.weights()) < 1e-13);
    }
}

#[test]
fn deep_horizon_matches_moderate_horizon_limit() {
    let g = common::logistic(30);
    let mu = DistributionVector::dirac(30, 29);
    let far = g.condition(&mu, 5000.0).unwrap();
    let near = g.condition(&mu, 200.0).unwrap();
    assert!(tv(far.weights(), near.weights()) < 1e-10);
    let l = g.log_survival_probability(&mu, 5000.0).unwrap();
    assert!(l.is_finite() && l < -100.0);
}

#[test]
fn generator_json_round_trip() {
    let g = common::logistic(12);
    let s = serde_json::to_string(&g).unwrap();
    let back: AbsorbedGenerator<f64> = serde_json::from_str(&s).unwrap();
    assert_eq!(g, back);
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["n"], 12);
    assert_eq!(v["rates"].as_array().unwrap().len(), 12);
    assert_eq!(v["kill"].as_array().unwrap().len(), 12);
    let d = DistributionVector::probability(vec![0.25, 0.75]).unwrap();
    assert_eq!(serde_json::to_string(&d).unwrap(), "[0.25,0.75]");
}

#[test]
fn survival_matrix_rows_are_substochastic() {
    let g = common::logistic(20);
    let p: Matrix<f64> = g.transition_matrix(2.0).unwrap();
    for s in p.row_sums() {
        assert!(s > 0.0 && s <= 1.0 + 1e-14);
    }
    assert!(p.iter().all(|&x| x >= 0.0));
}

#[test]
fn f32_chain_tracks_f64() {
    let g64 = t2();
    let g32 = AbsorbedGenerator::<f32>::from_dense(&[vec![0.0, 1.0], vec![2.0, 0.0]], vec![1.0, 0.0]).unwrap();
    let a = g64.condition(&DistributionVector::dirac(2, 1), 2.0).unwrap();
    let b = g32.condition(&DistributionVector::dirac(2, 1), 2.0).unwrap();
    for (x, y) in a.weights().iter().zip(b.weights()) {
        assert!((x - *y as f64).abs() < 1e-5);
    }
}
