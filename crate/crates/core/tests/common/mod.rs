#![allow(dead_code)]

use hyperclust::distributions::{GhdParams, StParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(p, |_, _| rng.random_range(-scale..scale))
}

/// Well-conditioned SPD matrix `A Aᵀ + p·0.3·I`.
pub fn random_spd(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(p, p) * (0.3 * p as f64)
}

pub fn random_ghd(rng: &mut ChaCha8Rng, p: usize) -> GhdParams {
    let lambda = rng.random_range(-3.0..3.0);
    let omega = rng.random_range(0.3..8.0);
    GhdParams::new(lambda, omega, random_vec(rng, p, 2.0), random_spd(rng, p), random_vec(rng, p, 1.5)).unwrap()
}

pub fn random_st(rng: &mut ChaCha8Rng, p: usize) -> StParams {
    let dof = rng.random_range(2.5..30.0);
    StParams::new(dof, random_vec(rng, p, 2.0), random_spd(rng, p), random_vec(rng, p, 1.5)).unwrap()
}

pub fn to_rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows()).map(|i| x.row(i).iter().cloned().collect()).collect()
}

pub fn to_mat(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    to_rows(m)
}
