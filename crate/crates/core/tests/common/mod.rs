#![allow(dead_code)]

use nalgebra::DMatrix;
use qsdlab_core::{build_bd, AbsorbedGenerator, BDSpec};

/// T2: two states, 1 → 2 at rate 1, 2 → 1 at rate 2, killed from 1 at rate 1.
pub fn t2() -> AbsorbedGenerator<f64> {
    AbsorbedGenerator::from_dense(&[vec![0.0, 1.0], vec![2.0, 0.0]], vec![1.0, 0.0]).unwrap()
}

pub fn logistic(n: usize) -> AbsorbedGenerator<f64> {
    build_bd(&BDSpec::from_exprs("k", "k + 0.1*k^2", "0.05", n).unwrap()).unwrap()
}

pub fn dense(gen: &AbsorbedGenerator<f64>) -> DMatrix<f64> {
    let l = gen.sub_generator();
    DMatrix::from_fn(gen.n(), gen.n(), |i, j| l[(i, j)])
}

/// `exp(tL)` by nalgebra's Padé scaling-and-squaring.
pub fn expm(gen: &AbsorbedGenerator<f64>, t: f64) -> DMatrix<f64> {
    (dense(gen) * t).exp()
}

pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn normalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}
