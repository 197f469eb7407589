//! Matrix norms and the factorization-based max-norm bounds.
//!
//! The exact max-norm is a semidefinite program and is not computed. What is
//! available instead is the sandwich
//!
//! ```text
//! ||M||_inf <= ||M||_max <= ||U||_{2,inf} ||V||_{2,inf}      for any M = U V^T
//! ||M||_* / sqrt(d1 d2) <= ||M||_max
//! ```

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Factorization};
use crate::sampling::SamplingDistribution;

/// Grothendieck's constant lies in this open interval.
pub const GROTHENDIECK_INTERVAL: (f64, f64) = (1.67, 1.79);

/// Upper end of [`GROTHENDIECK_INTERVAL`], used wherever an upper bound is needed.
pub const GROTHENDIECK_UPPER: f64 = GROTHENDIECK_INTERVAL.1;

/// Default relative singular-value cutoff for numeric rank.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormReport {
    pub frobenius: f64,
    pub linf: f64,
    /// Sum of singular values.
    pub trace: f64,
    /// Count of singular values above `rank_tolerance * sigma_max`.
    pub rank_numeric: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorNorms {
    pub two_inf_u: f64,
    pub two_inf_v: f64,
    /// `two_inf_u * two_inf_v`; bounds the max-norm of `U V^T` from above.
    pub max_norm_upper: f64,
}

/// Singular values in descending order.
pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = m
        .to_nalgebra()
        .singular_values()
        .iter()
        .map(|s| s.max(0.0))
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numeric rank with a relative cutoff.
pub fn numeric_rank(m: &DenseMatrix, rank_tolerance: f64) -> usize {
    rank_from_singular_values(&singular_values(m), rank_tolerance)
}

fn rank_from_singular_values(sv: &[f64], rank_tolerance: f64) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rank_tolerance * smax).count()
}

pub fn matrix_norms(m: &DenseMatrix, rank_tolerance: f64) -> Result<NormReport> {
    if !m.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    if !(rank_tolerance > 0.0) {
        return Err(Error::invalid(format!(
            "rank tolerance must be positive, got {rank_tolerance}"
        )));
    }
    let sv = singular_values(m);
    Ok(NormReport {
        frobenius: m.frobenius(),
        linf: m.linf(),
        trace: sv.iter().sum(),
        rank_numeric: rank_from_singular_values(&sv, rank_tolerance),
    })
}

pub fn factor_norms(f: &Factorization) -> Result<FactorNorms> {
    if !f.is_finite() {
        return Err(Error::invalid("factorization has non-finite entries"));
    }
    let two_inf_u = f.u().max_row_norm();
    let two_inf_v = f.v().max_row_norm();
    Ok(FactorNorms {
        two_inf_u,
        two_inf_v,
        max_norm_upper: two_inf_u * two_inf_v,
    })
}

/// `sum_{k,l} pi_kl * M_kl^2`, the squared norm weighted by the sampling distribution.
pub fn pi_weighted_sq_norm(m: &DenseMatrix, pi: &SamplingDistribution) -> Result<f64> {
    if m.shape() != pi.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", pi.shape().0, pi.shape().1),
            actual: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    Ok(m
        .as_slice()
        .iter()
        .zip(pi.probs())
        .map(|(x, p)| p * x * x)
        .sum())
}
