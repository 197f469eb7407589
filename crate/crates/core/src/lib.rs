//! Matrix completion under max-norm and entrywise constraints.
//!
//! The estimator minimizes the empirical squared loss over observed cells subject
//! to `||M||_inf <= alpha` and `||M||_max <= R`, solved in factored form
//! `M = U V^T` by projected gradient descent or a stepwise (per-cell) gradient
//! method. Around it sit sampling models, a spectral rank search, and
//! constructive checks of the associated norm inequalities and rate formulas.

pub mod error;
pub mod harness;
pub mod matrix;
pub mod model_select;
pub mod norms;
pub mod rng;
pub mod sampling;
pub mod solver;
pub mod theory;

pub use error::{Error, Result};
pub use matrix::{ConstraintSet, DenseMatrix, Factorization};
pub use sampling::{NoiseModel, ObservationSet, SamplingDistribution};
