//! Factored solvers for the max-norm constrained least-squares estimator
//!
//! ```text
//! minimize    (1/n) sum_t (Y_t - (U V^T)_{i_t j_t})^2
//! subject to  max(||U||_{2,inf}^2, ||V||_{2,inf}^2) <= R,   max_{ij} |U_i . V_j| <= alpha
//! ```
//!
//! Row constraints are on *squared* row norms, so rows live in a ball of radius
//! `sqrt(R)` and every feasible product has max-norm at most `R`.

mod loss;
mod pgd;
mod project;
mod stepwise;

pub use loss::{empirical_loss_and_grad, LossGrad, SparseGrad};
pub use pgd::{fit_pgd, fit_pgd_from};
pub use project::{linf_rescale, project_factor_rows};
pub use stepwise::{fit_stepwise, fit_stepwise_from};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{ConstraintSet, DenseMatrix, Factorization};
use crate::rng::{stream, Stream};
use crate::sampling::ObservationSet;

/// Slack used when reporting feasibility of a returned iterate.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Pgd,
    Stepwise,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pgd" => Ok(Algorithm::Pgd),
            "stepwise" => Ok(Algorithm::Stepwise),
            other => Err(Error::invalid(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Factor width. When unset, `min(d1, d2, rank_hint + 1)` or `min(d1, d2, 32)`.
    pub k: Option<usize>,
    pub rank_hint: Option<usize>,
    /// Step size. When unset, chosen from the observation layout (see [`SolverConfig::step_size`]).
    pub tau: Option<f64>,
    pub max_iters: usize,
    /// Relative objective change below which iteration stops.
    pub tol: f64,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Passes over the distinct observed cells for the stepwise method.
    pub epochs: usize,
    /// PGD only: halve the step (at most this many times) when the objective would increase.
    /// Zero disables backtracking.
    pub max_halvings: usize,
    /// Stepwise only: record the largest touched-row squared norm after every update.
    pub audit: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k: None,
            rank_hint: None,
            tau: None,
            max_iters: 5000,
            tol: 1e-7,
            seed: 0,
            algorithm: Algorithm::Pgd,
            epochs: 200,
            max_halvings: 20,
            audit: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, d1: usize, d2: usize) -> Result<()> {
        if let Some(k) = self.k {
            if k == 0 || k > d1 + d2 {
                return Err(Error::invalid(format!(
                    "factor width k = {k} must lie in 1..={}",
                    d1 + d2
                )));
            }
        }
        if let Some(tau) = self.tau {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(Error::invalid(format!("step size must be positive, got {tau}")));
            }
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 || self.epochs == 0 {
            return Err(Error::invalid("max_iters and epochs must be positive"));
        }
        Ok(())
    }

    /// Resolved factor width for a `d1 x d2` problem.
    pub fn width(&self, d1: usize, d2: usize) -> usize {
        match (self.k, self.rank_hint) {
            (Some(k), _) => k,
            (None, Some(r)) => (r + 1).min(d1).min(d2),
            (None, None) => d1.min(d2).min(32),
        }
    }

    /// Resolved step size.
    ///
    /// PGD differentiates the averaged loss, whose curvature in a factor row is at most
    /// `(2/n) * count * R` where `count` is the number of observations on that row or
    /// column. The default is the reciprocal of that bound. The stepwise method
    /// differentiates a single squared residual (curvature at most `2R`), so its default
    /// is `min(0.1, 1/(4R))`.
    pub(crate) fn step_size(&self, n: usize, max_line_count: usize, radius: f64) -> f64 {
        if let Some(t) = self.tau {
            return t;
        }
        match self.algorithm {
            Algorithm::Pgd => n as f64 / (2.0 * radius * max_line_count.max(1) as f64),
            Algorithm::Stepwise => (0.25 / radius).min(0.1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Feasibility {
    /// `max(||U||_{2,inf}^2, ||V||_{2,inf}^2) <= R`
    pub rows: bool,
    /// `||U V^T||_inf <= alpha`
    pub linf: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub factorization: Factorization,
    /// Empirical loss of the initial iterate followed by one value per iteration or epoch.
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    pub feasible: Feasibility,
    /// `U V^T`
    pub completed: DenseMatrix,
    /// Stepwise audit: largest squared norm of any touched row right after its update.
    pub audit_max_row_sq_norm: Option<f64>,
}

impl SolveResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is nonempty")
    }

    fn new(
        factorization: Factorization,
        objective_trace: Vec<f64>,
        iterations_run: usize,
        constraints: &ConstraintSet,
        audit_max_row_sq_norm: Option<f64>,
    ) -> Self {
        let completed = factorization.product();
        let row_sq = factorization
            .u()
            .max_row_norm()
            .powi(2)
            .max(factorization.v().max_row_norm().powi(2));
        let feasible = Feasibility {
            rows: row_sq <= constraints.radius() + FEASIBILITY_SLACK,
            linf: completed.linf() <= constraints.alpha() + FEASIBILITY_SLACK,
        };
        Self {
            factorization,
            objective_trace,
            iterations_run,
            feasible,
            completed,
            audit_max_row_sq_norm,
        }
    }
}

/// Runs the algorithm selected in `cfg`.
pub fn fit(obs: &ObservationSet, constraints: &ConstraintSet, cfg: &SolverConfig) -> Result<SolveResult> {
    match cfg.algorithm {
        Algorithm::Pgd => fit_pgd(obs, constraints, cfg),
        Algorithm::Stepwise => fit_stepwise(obs, constraints, cfg),
    }
}

/// Seeded feasible starting point: i.i.d. normal entries with variance `sqrt(R)/k`,
/// then the entrywise rescale and the row projection.
pub fn initial_factorization(
    d1: usize,
    d2: usize,
    k: usize,
    constraints: &ConstraintSet,
    seed: u64,
) -> Factorization {
    let mut rng = stream(seed, Stream::SolverInit);
    let sd = (constraints.radius().sqrt() / k as f64).sqrt();
    let mut draw = |rows| {
        DenseMatrix::from_fn(rows, k, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
    };
    let u = draw(d1);
    let v = draw(d2);
    let mut f = Factorization::new(u, v).expect("same width");
    enforce_constraints(&mut f, constraints);
    f
}

/// Entrywise rescale followed by row projection on both factors. Returns the product's
/// `linf` before rescaling; a non-finite value means the iterate overflowed.
pub(crate) fn enforce_constraints(f: &mut Factorization, constraints: &ConstraintSet) -> f64 {
    let linf = project::linf_rescale_in_place(f, constraints.alpha());
    let (u, v) = f.parts_mut();
    project::project_rows_in_place(u, constraints.radius());
    project::project_rows_in_place(v, constraints.radius());
    linf
}

pub(crate) fn check_start(
    start: Option<&Factorization>,
    obs: &ObservationSet,
    constraints: &ConstraintSet,
    cfg: &SolverConfig,
) -> Result<Factorization> {
    let (d1, d2) = obs.shape();
    cfg.validate(d1, d2)?;
    match start {
        Some(f) => {
            if f.product_shape() != (d1, d2) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{d1}x{d2}"),
                    actual: format!("{}x{}", f.product_shape().0, f.product_shape().1),
                });
            }
            if !f.is_finite() {
                return Err(Error::invalid("starting factorization is not finite"));
            }
            Ok(f.clone())
        }
        None => Ok(initial_factorization(d1, d2, cfg.width(d1, d2), constraints, cfg.seed)),
    }
}

pub(crate) fn relative_change(prev: f64, cur: f64) -> f64 {
    (cur - prev).abs() / prev.max(1e-12)
}
