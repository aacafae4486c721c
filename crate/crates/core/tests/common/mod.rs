#![allow(dead_code)]

use fwda_core::SymmetricMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `AᵀA / k + ridge I` with `A` of size `k x p`.
pub fn random_spd(rng: &mut ChaCha8Rng, p: usize, k: usize, ridge: f64) -> SymmetricMatrix {
    let a = gaussian_matrix(rng, k, p);
    let m = a.transpose() * &a / k as f64 + DMatrix::identity(p, p) * ridge;
    SymmetricMatrix::new(m).unwrap()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}
