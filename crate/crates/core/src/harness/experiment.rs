use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{ConstraintSet, DenseMatrix};
use crate::norms::pi_weighted_sq_norm;
use crate::rng::{derive_seed, stream, Stream};
use crate::sampling::{observe, NoiseModel, SamplingDistribution};
use crate::solver::{self, SolverConfig};

use super::config::ExperimentConfig;

pub const CSV_HEADER: &str =
    "n,replicate,seed,per_entry_mse,pi_weighted_mse,runtime_ms,iterations,feasible_rows,feasible_linf,status";

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub matrix: DenseMatrix,
    pub rank: usize,
    /// `K(alpha, alpha sqrt(rank))`, which contains `matrix`.
    pub witness: ConstraintSet,
}

/// `M0 = A B^T` with `A`, `B` i.i.d. uniform on `[-1, 1)`, rescaled so `||M0||_inf = alpha`.
pub fn make_ground_truth(d1: usize, d2: usize, rank: usize, alpha: f64, seed: u64) -> Result<GroundTruth> {
    if d1 == 0 || d2 == 0 || rank == 0 || rank > d1.min(d2) {
        return Err(Error::invalid(format!(
            "rank {rank} must lie in 1..={} for a {d1}x{d2} matrix",
            d1.min(d2)
        )));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    let mut rng = stream(seed, Stream::GroundTruth);
    let a = DenseMatrix::from_fn(d1, rank, |_, _| rng.random_range(-1.0..1.0));
    let b = DenseMatrix::from_fn(d2, rank, |_, _| rng.random_range(-1.0..1.0));
    let mut m = a.mul_transpose(&b);
    let linf = m.linf();
    if linf == 0.0 {
        return Err(Error::invalid("degenerate ground truth"));
    }
    m.scale(alpha / linf);
    // Pin the largest entry so the bound is attained exactly after rounding.
    let pos = m
        .as_slice()
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .map(|(p, _)| p)
        .expect("nonempty");
    let (i, j) = (pos / d2, pos % d2);
    m.set(i, j, alpha.copysign(m.get(i, j)));
    Ok(GroundTruth {
        matrix: m,
        rank,
        witness: ConstraintSet::for_rank(alpha, rank)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrialStatus {
    Ok,
    Diverged,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    /// `||M_hat - M0||_F^2 / (d1 d2)`; NaN for failed trials.
    pub per_entry_mse: f64,
    /// `sum pi_kl (M_hat - M0)_kl^2`; NaN for failed trials.
    pub pi_weighted_mse: f64,
    pub runtime_ms: u64,
    pub iterations: usize,
    pub feasible_rows: bool,
    pub feasible_linf: bool,
    pub status: TrialStatus,
}

impl TrialRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.replicate,
            self.seed,
            self.per_entry_mse,
            self.pi_weighted_mse,
            self.runtime_ms,
            self.iterations,
            self.feasible_rows,
            self.feasible_linf,
            match self.status {
                TrialStatus::Ok => "ok",
                TrialStatus::Diverged => "diverged",
            }
        )
    }
}

/// Everything a trial needs, resolved once from the config.
struct Plan<'a> {
    cfg: &'a ExperimentConfig,
    truth: DenseMatrix,
    pi: SamplingDistribution,
    noise: NoiseModel,
    constraints: ConstraintSet,
    solver: SolverConfig,
}

impl Plan<'_> {
    fn trial(&self, n: usize, replicate: usize) -> Result<TrialRecord> {
        let seed = derive_seed(self.cfg.seed, &[n as u64, replicate as u64]);
        let start = Instant::now();
        let idx = self.pi.sample_indices(n, seed);
        let obs = observe(&self.truth, &idx, &self.noise, seed)?;
        let solver_cfg = SolverConfig {
            seed,
            ..self.solver.clone()
        };
        let fitted = solver::fit(&obs, &self.constraints, &solver_cfg);
        let runtime_ms = if self.cfg.record_timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        };
        let (d1, d2) = self.truth.shape();
        match fitted {
            Ok(res) => {
                let diff = res.completed.sub(&self.truth)?;
                Ok(TrialRecord {
                    n,
                    replicate,
                    seed,
                    per_entry_mse: diff.frobenius_sq() / (d1 * d2) as f64,
                    pi_weighted_mse: pi_weighted_sq_norm(&diff, &self.pi)?,
                    runtime_ms,
                    iterations: res.iterations_run,
                    feasible_rows: res.feasible.rows,
                    feasible_linf: res.feasible.linf,
                    status: TrialStatus::Ok,
                })
            }
            Err(Error::Divergence { iteration, .. }) => Ok(TrialRecord {
                n,
                replicate,
                seed,
                per_entry_mse: f64::NAN,
                pi_weighted_mse: f64::NAN,
                runtime_ms,
                iterations: iteration,
                feasible_rows: false,
                feasible_linf: false,
                status: TrialStatus::Diverged,
            }),
            Err(e) => Err(e),
        }
    }
}

/// Runs every `(n, replicate)` trial and returns records sorted by `n`, then replicate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    run_experiment_to(cfg, None::<&mut Vec<u8>>)
}

/// Like [`run_experiment`], additionally streaming CSV rows to `sink` in canonical
/// order as soon as each prefix of the grid is complete.
pub fn run_experiment_to<W: Write + Send>(cfg: &ExperimentConfig, sink: Option<W>) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let t = &cfg.truth;
    let plan = Plan {
        cfg,
        truth: make_ground_truth(t.d1, t.d2, t.rank, t.alpha, t.seed)?.matrix,
        pi: cfg.distribution()?,
        noise: cfg.noise_model()?,
        constraints: cfg.constraint_set()?,
        solver: cfg.solver_config()?,
    };
    let jobs: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();

    struct Writer<W> {
        sink: Option<W>,
        next: usize,
        pending: BTreeMap<usize, String>,
    }
    let mut sink = sink;
    if let Some(w) = sink.as_mut() {
        writeln!(w, "{CSV_HEADER}")?;
    }
    let writer = Mutex::new(Writer {
        sink,
        next: 0,
        pending: BTreeMap::new(),
    });

    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .enumerate()
        .map(|(pos, &(n, r))| {
            let rec = plan.trial(n, r)?;
            let mut w = writer.lock().expect("writer lock");
            if w.sink.is_some() {
                w.pending.insert(pos, rec.csv_row());
                while let Some(row) = {
                    let next = w.next;
                    w.pending.remove(&next)
                } {
                    let sink = w.sink.as_mut().expect("sink present");
                    writeln!(sink, "{row}")?;
                    sink.flush()?;
                    w.next += 1;
                }
            }
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    Ok(records)
}

pub fn write_csv(records: &[TrialRecord], mut w: impl Write) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Median of a nonempty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// `(n, median per-entry MSE)` over successful trials, ascending in `n`.
pub fn median_mse_by_n(records: &[TrialRecord]) -> Vec<(usize, f64)> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.status == TrialStatus::Ok) {
        groups.entry(r.n).or_default().push(r.per_entry_mse);
    }
    groups.into_iter().map(|(n, v)| (n, median(&v))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(ln n, ln median MSE)`.
pub fn fit_scaling_slope(records: &[TrialRecord]) -> Result<ScalingFit> {
    let points = median_mse_by_n(records);
    if points.len() < 3 {
        return Err(Error::invalid(format!(
            "slope fit needs at least 3 distinct sample sizes, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(_, m)| !(m > 0.0)) {
        return Err(Error::invalid("median MSE must be positive to take logs"));
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, m)| m.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(ScalingFit { slope, intercept, r2 })
}
