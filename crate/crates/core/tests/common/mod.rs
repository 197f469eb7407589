#![allow(dead_code)]

use maxnorm::{DenseMatrix, Factorization, NoiseModel, ObservationSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform on `[-1, 1)`.
pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_factorization(rng: &mut ChaCha8Rng, d1: usize, d2: usize, k: usize) -> Factorization {
    Factorization::new(uniform_matrix(rng, d1, k), uniform_matrix(rng, d2, k)).unwrap()
}

/// Every cell once, row-major.
pub fn all_cells(d1: usize, d2: usize) -> Vec<(usize, usize)> {
    (0..d1).flat_map(|i| (0..d2).map(move |j| (i, j))).collect()
}

pub fn full_observations(m: &DenseMatrix) -> ObservationSet {
    let (d1, d2) = m.shape();
    maxnorm::sampling::observe(m, &all_cells(d1, d2), &NoiseModel::none(), 0).unwrap()
}

pub fn rel_frobenius(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.sub(b).unwrap().frobenius() / b.frobenius()
}
