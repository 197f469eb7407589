use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Factorization};
use crate::sampling::ObservationSet;

/// Gradient of the empirical loss with respect to the product matrix. Nonzero only on
/// observed cells; stored sorted by `(row, col)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseGrad {
    d1: usize,
    d2: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseGrad {
    pub fn shape(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&(i, j)))
            .map_or(0.0, |p| self.entries[p].2)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.d1, self.d2);
        for &(i, j, g) in &self.entries {
            m.set(i, j, g);
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: SparseGrad,
}

/// Observations grouped by distinct cell. Built once per solve.
#[derive(Clone, Debug)]
pub(crate) struct CellTable {
    d1: usize,
    d2: usize,
    n: usize,
    /// Distinct cells sorted by `(row, col)`.
    pub(crate) cells: Vec<(usize, usize)>,
    /// Observation count per cell.
    pub(crate) counts: Vec<usize>,
    /// Sum of observed values per cell.
    pub(crate) sums: Vec<f64>,
    /// Cell id of every observation, in observation order.
    obs_cell: Vec<usize>,
    values: Vec<f64>,
}

impl CellTable {
    pub(crate) fn new(obs: &ObservationSet) -> Self {
        let (d1, d2) = obs.shape();
        let mut cells: Vec<(usize, usize)> = obs.indices().to_vec();
        cells.sort_unstable();
        cells.dedup();
        let id: HashMap<(usize, usize), usize> =
            cells.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let mut counts = vec![0usize; cells.len()];
        let mut sums = vec![0.0; cells.len()];
        let mut obs_cell = Vec::with_capacity(obs.len());
        for (c, y) in obs.iter() {
            let k = id[&c];
            counts[k] += 1;
            sums[k] += y;
            obs_cell.push(k);
        }
        Self {
            d1,
            d2,
            n: obs.len(),
            cells,
            counts,
            sums,
            obs_cell,
            values: obs.values().to_vec(),
        }
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    pub(crate) fn shape(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    /// Largest number of observations landing in a single row or column.
    pub(crate) fn max_line_count(&self) -> usize {
        let mut rows = vec![0usize; self.d1];
        let mut cols = vec![0usize; self.d2];
        for (&(i, j), &c) in self.cells.iter().zip(&self.counts) {
            rows[i] += c;
            cols[j] += c;
        }
        rows.into_iter().chain(cols).max().unwrap_or(0)
    }

    fn fitted(&self, f: &Factorization) -> Vec<f64> {
        self.cells.iter().map(|&(i, j)| f.entry(i, j)).collect()
    }

    pub(crate) fn loss(&self, f: &Factorization) -> f64 {
        self.loss_from_fitted(&self.fitted(f))
    }

    fn loss_from_fitted(&self, fitted: &[f64]) -> f64 {
        let sse: f64 = self
            .obs_cell
            .iter()
            .zip(&self.values)
            .map(|(&k, &y)| (y - fitted[k]).powi(2))
            .sum();
        sse / self.n as f64
    }

    /// Loss and per-cell gradient `(2/n) * sum_t (m - y_t)`, aligned with `cells`.
    pub(crate) fn loss_and_cell_grad(&self, f: &Factorization) -> (f64, Vec<f64>) {
        let fitted = self.fitted(f);
        let scale = 2.0 / self.n as f64;
        let grad = fitted
            .iter()
            .zip(&self.counts)
            .zip(&self.sums)
            .map(|((&m, &c), &s)| scale * (c as f64 * m - s))
            .collect();
        (self.loss_from_fitted(&fitted), grad)
    }
}

/// Empirical squared loss `(1/n) sum_t (y_t - (U V^T)_{i_t j_t})^2` and its gradient
/// with respect to `U V^T`. Repeated draws of a cell contribute with multiplicity.
pub fn empirical_loss_and_grad(f: &Factorization, obs: &ObservationSet) -> Result<LossGrad> {
    if f.product_shape() != obs.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", obs.shape().0, obs.shape().1),
            actual: format!("{}x{}", f.product_shape().0, f.product_shape().1),
        });
    }
    let table = CellTable::new(obs);
    let (loss, g) = table.loss_and_cell_grad(f);
    let entries = table
        .cells
        .iter()
        .zip(g)
        .map(|(&(i, j), g)| (i, j, g))
        .collect();
    Ok(LossGrad {
        loss,
        grad: SparseGrad {
            d1: table.d1,
            d2: table.d2,
            entries,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fac(u: &[&[f64]], v: &[&[f64]]) -> Factorization {
        Factorization::new(DenseMatrix::from_rows(u), DenseMatrix::from_rows(v)).unwrap()
    }

    #[test]
    fn exact_fit_has_zero_loss_and_gradient() {
        let f = fac(&[&[1.0], &[2.0]], &[&[3.0], &[-1.0]]);
        let m = f.product();
        let idx = vec![(0, 0), (1, 1), (1, 0), (1, 0)];
        let vals = idx.iter().map(|&(i, j)| m.get(i, j)).collect();
        let obs = ObservationSet::new(2, 2, idx, vals).unwrap();
        let lg = empirical_loss_and_grad(&f, &obs).unwrap();
        assert_eq!(lg.loss, 0.0);
        assert!(lg.grad.entries().iter().all(|e| e.2 == 0.0));
    }

    #[test]
    fn single_observation_arithmetic() {
        let f = fac(&[&[0.0]], &[&[0.0]]);
        let obs = ObservationSet::new(1, 1, vec![(0, 0)], vec![1.0]).unwrap();
        let lg = empirical_loss_and_grad(&f, &obs).unwrap();
        assert_eq!(lg.loss, 1.0);
        assert_eq!(lg.grad.get(0, 0), -2.0);
    }

    #[test]
    fn repeated_draws_accumulate() {
        let f = fac(&[&[0.0]], &[&[0.0], &[0.0]]);
        let obs = ObservationSet::new(1, 2, vec![(0, 0), (0, 0), (0, 1)], vec![1.0, 2.0, 3.0]).unwrap();
        let lg = empirical_loss_and_grad(&f, &obs).unwrap();
        assert!((lg.loss - 14.0 / 3.0).abs() < 1e-15);
        assert!((lg.grad.get(0, 0) + 2.0).abs() < 1e-15);
        assert!((lg.grad.get(0, 1) + 2.0).abs() < 1e-15);
        assert_eq!(lg.grad.to_dense().shape(), (1, 2));
    }

    #[test]
    fn shape_mismatch() {
        let f = fac(&[&[0.0]], &[&[0.0]]);
        let obs = ObservationSet::new(2, 1, vec![(1, 0)], vec![1.0]).unwrap();
        assert!(empirical_loss_and_grad(&f, &obs).is_err());
    }

    #[test]
    fn max_line_count_counts_multiplicity() {
        let obs = ObservationSet::new(3, 3, vec![(0, 0), (0, 0), (0, 2), (1, 2)], vec![0.0; 4]).unwrap();
        assert_eq!(CellTable::new(&obs).max_line_count(), 3);
    }

    #[test]
    fn loss_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = DenseMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let v = DenseMatrix::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0));
        let f = Factorization::new(u, v).unwrap();
        let idx: Vec<_> = (0..40).map(|_| (rng.random_range(0..6), rng.random_range(0..5))).collect();
        let vals: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let obs = ObservationSet::new(6, 5, idx.clone(), vals.clone()).unwrap();
        let m = f.product();
        let direct = idx
            .iter()
            .zip(&vals)
            .map(|(&(i, j), y)| (y - m.get(i, j)).powi(2))
            .sum::<f64>()
            / 40.0;
        let lg = empirical_loss_and_grad(&f, &obs).unwrap();
        assert!((lg.loss - direct).abs() < 1e-14);
    }
}
