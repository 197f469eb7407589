use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::norms::GROTHENDIECK_UPPER;
use crate::rng::{derive_seed, stream, Stream};

use super::KeyValueReport;

/// Largest `d1 + d2` accepted by the enumeration.
pub const MAX_ENUMERATION_DIM: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct RademacherReport {
    pub n: usize,
    pub draws: usize,
    /// `(2 / n)` times the average over sign draws of the exact supremum.
    pub mc_mean: f64,
    /// `12 sqrt((d1 + d2) / n)`.
    pub bound: f64,
    /// `mc_mean` inflated by the upper Grothendieck constant; an upper estimate for
    /// the max-norm unit ball.
    pub kg_upper: f64,
}

impl KeyValueReport for RademacherReport {
    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n", self.n.to_string()),
            ("draws", self.draws.to_string()),
            ("mc_mean", self.mc_mean.to_string()),
            ("bound", self.bound.to_string()),
            ("kg_upper", self.kg_upper.to_string()),
            ("within_bound", (self.mc_mean <= self.bound).to_string()),
        ]
    }
}

/// `max |sum_t eps_t u_{i_t} v_{j_t}|` over all sign vectors `u`, `v`.
///
/// For fixed `u` the inner sum is `sum_j v_j c_j` with `c_j` the signed column
/// totals, so the best `v` gives `sum_j |c_j|`. Flipping `u` flips every `c_j`,
/// which leaves `2^(d1 - 1)` row patterns to visit. The shorter side is enumerated.
pub fn sign_matrix_sup(d1: usize, d2: usize, indices: &[(usize, usize)], eps: &[f64]) -> Result<f64> {
    check_dims(d1, d2, indices)?;
    if eps.len() != indices.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} signs", indices.len()),
            actual: eps.len().to_string(),
        });
    }
    Ok(sup_unchecked(d1, d2, indices, eps))
}

fn check_dims(d1: usize, d2: usize, indices: &[(usize, usize)]) -> Result<()> {
    if d1 == 0 || d2 == 0 {
        return Err(Error::invalid("dimensions must be positive"));
    }
    if d1 + d2 > MAX_ENUMERATION_DIM {
        return Err(Error::invalid(format!(
            "d1 + d2 = {} exceeds the enumeration limit {MAX_ENUMERATION_DIM}",
            d1 + d2
        )));
    }
    if let Some(&(i, j)) = indices.iter().find(|&&(i, j)| i >= d1 || j >= d2) {
        return Err(Error::invalid(format!("index ({i}, {j}) outside {d1}x{d2}")));
    }
    Ok(())
}

fn sup_unchecked(d1: usize, d2: usize, indices: &[(usize, usize)], eps: &[f64]) -> f64 {
    // Enumerate over the shorter side.
    let (rows, cols, flip) = if d1 <= d2 { (d1, d2, false) } else { (d2, d1, true) };
    let cells: Vec<(usize, usize)> = indices
        .iter()
        .map(|&(i, j)| if flip { (j, i) } else { (i, j) })
        .collect();
    let mut totals = vec![0.0; cols];
    let mut best = 0.0_f64;
    for pattern in 0..(1u64 << (rows - 1)) {
        totals.iter_mut().for_each(|c| *c = 0.0);
        for (&(i, j), e) in cells.iter().zip(eps) {
            // Row 0 is pinned to +1.
            let sign = if i > 0 && pattern >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 };
            totals[j] += sign * e;
        }
        best = best.max(totals.iter().map(|c| c.abs()).sum());
    }
    best
}

/// Monte Carlo estimate of the empirical Rademacher complexity of the rank-one sign
/// matrices on a fixed index sample, with the supremum computed exactly per draw.
///
/// Draw `t` uses its own seed derived from `seed` and `t`, so the result does not
/// depend on how the draws are scheduled.
pub fn rademacher_sign_sup(
    d1: usize,
    d2: usize,
    indices: &[(usize, usize)],
    draws: usize,
    seed: u64,
) -> Result<RademacherReport> {
    check_dims(d1, d2, indices)?;
    if indices.is_empty() {
        return Err(Error::invalid("index sample is empty"));
    }
    if draws == 0 {
        return Err(Error::invalid("need at least one sign draw"));
    }
    let n = indices.len();
    let sups: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(derive_seed(seed, &[t]), Stream::Rademacher);
            let eps: Vec<f64> = (0..n)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            sup_unchecked(d1, d2, indices, &eps)
        })
        .collect();
    let mc_mean = 2.0 / n as f64 * sups.iter().sum::<f64>() / draws as f64;
    Ok(RademacherReport {
        n,
        draws,
        mc_mean,
        bound: 12.0 * ((d1 + d2) as f64 / n as f64).sqrt(),
        kg_upper: GROTHENDIECK_UPPER * mc_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Visits every `(u, v)` pair without the symmetry reductions.
    fn brute_force(d1: usize, d2: usize, indices: &[(usize, usize)], eps: &[f64]) -> f64 {
        let mut best = 0.0_f64;
        for u in 0..1u32 << d1 {
            for v in 0..1u32 << d2 {
                let s: f64 = indices
                    .iter()
                    .zip(eps)
                    .map(|(&(i, j), e)| {
                        let su = if u >> i & 1 == 1 { -1.0 } else { 1.0 };
                        let sv = if v >> j & 1 == 1 { -1.0 } else { 1.0 };
                        e * su * sv
                    })
                    .sum();
                best = best.max(s.abs());
            }
        }
        best
    }

    #[test]
    fn matches_full_enumeration() {
        let mut rng = stream(99, Stream::Rademacher);
        for _ in 0..200 {
            let d1 = rng.random_range(1..5);
            let d2 = rng.random_range(1..5);
            let n = rng.random_range(1..12);
            let idx: Vec<_> = (0..n)
                .map(|_| (rng.random_range(0..d1), rng.random_range(0..d2)))
                .collect();
            let eps: Vec<f64> = (0..n).map(|_| if rng.random() { 1.0 } else { -1.0 }).collect();
            assert_eq!(sign_matrix_sup(d1, d2, &idx, &eps).unwrap(), brute_force(d1, d2, &idx, &eps));
        }
    }

    #[test]
    fn one_by_one_is_absolute_sum() {
        let idx = vec![(0, 0); 5];
        let eps = [1.0, 1.0, -1.0, 1.0, 1.0];
        assert_eq!(sign_matrix_sup(1, 1, &idx, &eps).unwrap(), 3.0);
    }

    #[test]
    fn one_by_one_mean_matches_binomial() {
        // |sum of 4 signs| is 4 w.p. 2/16, 2 w.p. 8/16 and 0 otherwise.
        let expected = 2.0 / 4.0 * (4.0 * 2.0 / 16.0 + 2.0 * 8.0 / 16.0);
        let rep = rademacher_sign_sup(1, 1, &[(0, 0); 4], 20_000, 5).unwrap();
        assert!((rep.mc_mean - expected).abs() < 0.02, "{} vs {expected}", rep.mc_mean);
    }

    #[test]
    fn two_by_two_within_bound() {
        let idx = [(0, 0), (0, 1), (1, 0), (1, 1)];
        let rep = rademacher_sign_sup(2, 2, &idx, 2000, 1).unwrap();
        assert!(rep.mc_mean <= rep.bound);
        assert_eq!(rep.bound, 12.0);
        assert_eq!(rep.kg_upper, GROTHENDIECK_UPPER * rep.mc_mean);
    }

    #[test]
    fn relabeling_rows_and_columns_preserves_estimate() {
        let idx = [(0, 1), (2, 3), (1, 1), (3, 0), (2, 2), (0, 0), (3, 3)];
        let relabeled: Vec<_> = idx.iter().map(|&(i, j)| (3 - i, (j + 1) % 4)).collect();
        let a = rademacher_sign_sup(4, 4, &idx, 300, 8).unwrap();
        let b = rademacher_sign_sup(4, 4, &relabeled, 300, 8).unwrap();
        assert_eq!(a.mc_mean, b.mc_mean);
    }

    #[test]
    fn transposed_sample_gives_same_sup() {
        let idx = [(0, 4), (1, 2), (1, 0), (0, 3)];
        let t: Vec<_> = idx.iter().map(|&(i, j)| (j, i)).collect();
        let eps = [1.0, -1.0, -1.0, 1.0];
        assert_eq!(
            sign_matrix_sup(2, 5, &idx, &eps).unwrap(),
            sign_matrix_sup(5, 2, &t, &eps).unwrap()
        );
    }

    #[test]
    fn rejects_large_or_bad_inputs() {
        assert!(rademacher_sign_sup(13, 12, &[(0, 0)], 1, 0).unwrap_err().is_validation());
        assert!(rademacher_sign_sup(2, 2, &[(2, 0)], 1, 0).is_err());
        assert!(rademacher_sign_sup(2, 2, &[], 1, 0).is_err());
        assert!(rademacher_sign_sup(2, 2, &[(0, 0)], 0, 0).is_err());
        assert!(sign_matrix_sup(2, 2, &[(0, 0)], &[1.0, 1.0]).is_err());
    }
}
