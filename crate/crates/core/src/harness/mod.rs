//! Experiment orchestration: synthetic ground truth, seeded trial grids, CSV output,
//! and the log-log slope fit of error against sample size.

mod config;
mod experiment;

pub use config::{ConstraintSpec, ExperimentConfig, NoiseSpec, SamplingSpec, SolverSpec, TruthSpec};
pub use experiment::{
    fit_scaling_slope, make_ground_truth, median, median_mse_by_n, run_experiment, run_experiment_to,
    write_csv, GroundTruth, ScalingFit, TrialRecord, TrialStatus, CSV_HEADER,
};
