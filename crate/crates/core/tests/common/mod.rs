#![allow(dead_code)]

use lossrank_core::{standardize, Dataset, StandardizedDataset};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Gaussian design, sparse random coefficients, unit noise.
pub fn raw_instance(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let x = DMatrix::from_fn(n, d, |_, _| gaussian(rng));
    let beta: Vec<f64> = (0..d)
        .map(|_| if rng.random_bool(0.4) { rng.random_range(-3.0..3.0) } else { 0.0 })
        .collect();
    let mut y = &x * DVector::from_vec(beta);
    for v in y.iter_mut() {
        *v += gaussian(rng);
    }
    Dataset::new(x, y, None).unwrap()
}

pub fn instance(rng: &mut ChaCha8Rng, n: usize, d: usize) -> StandardizedDataset {
    standardize(&raw_instance(rng, n, d)).unwrap()
}
