//! Experiment configuration.
//!
//! The file is flat `key = value` text with dotted section prefixes, which is a
//! subset of TOML:
//!
//! ```text
//! seed = 7
//! n_grid = [1500, 3000, 6000, 12000]
//! replicates = 10
//! truth.d1 = 60
//! truth.d2 = 60
//! truth.rank = 3
//! truth.alpha = 1.0
//! truth.seed = 11
//! sampling.kind = "uniform"      # uniform | ramp | product | file
//! noise.kind = "gaussian"        # gaussian | laplace | none
//! noise.sigma = 0.5
//! constraints.radius_rule = "alpha_sqrt_rank"
//! solver.algorithm = "pgd"
//! solver.rank_hint = 3
//! ```
//!
//! `sampling.kind = "ramp"` puts row weight `1 + i/d1` on row `i` and column weight
//! `1 + j/d2` on column `j`. `"product"` takes explicit `sampling.rows` and
//! `sampling.cols` arrays; `"file"` reads `sampling.path` in the distribution file
//! format. `constraints.alpha` defaults to `truth.alpha`; `constraints.radius`
//! overrides the radius rule. Unknown keys are rejected.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::matrix::ConstraintSet;
use crate::sampling::{DistributionSpec, NoiseKind, NoiseModel, SamplingDistribution};
use crate::solver::{Algorithm, SolverConfig};

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    pub d1: usize,
    pub d2: usize,
    pub rank: usize,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", deny_unknown_fields)]
pub enum SamplingSpec {
    Uniform,
    Ramp,
    Product { rows: Vec<f64>, cols: Vec<f64> },
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: String,
    #[serde(default)]
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub alpha: Option<f64>,
    pub radius: Option<f64>,
    /// Only `alpha_sqrt_rank` is defined.
    pub radius_rule: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub algorithm: Option<String>,
    pub k: Option<usize>,
    pub rank_hint: Option<usize>,
    pub tau: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub epochs: Option<usize>,
    pub max_halvings: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub n_grid: Vec<usize>,
    #[serde(default = "one_usize")]
    pub replicates: usize,
    pub truth: TruthSpec,
    #[serde(default = "uniform")]
    pub sampling: SamplingSpec,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub constraints: ConstraintSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    /// CSV destination used by the command-line runner.
    pub output: Option<PathBuf>,
    /// Wall-clock timing in the `runtime_ms` column. Off by default so that reruns
    /// produce identical files; when off the column holds 0.
    #[serde(default)]
    pub record_timing: bool,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn uniform() -> SamplingSpec {
    SamplingSpec::Uniform
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| {
            let line = e
                .span()
                .map(|sp| s[..sp.start.min(s.len())].lines().count().max(1))
                .unwrap_or(0);
            Error::parse(line, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        // Relative paths inside the file resolve against the file's directory.
        if let Some(dir) = path.parent() {
            if let SamplingSpec::File { path: p } = &mut cfg.sampling {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
            if let Some(out) = cfg.output.as_mut() {
                if out.is_relative() {
                    *out = dir.join(&*out);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::invalid("n_grid is empty"));
        }
        if self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("n_grid must be positive and strictly increasing"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        let t = &self.truth;
        if t.d1 == 0 || t.d2 == 0 || t.rank == 0 || t.rank > t.d1.min(t.d2) {
            return Err(Error::invalid(format!(
                "truth rank {} must lie in 1..={}",
                t.rank,
                t.d1.min(t.d2)
            )));
        }
        if !(t.alpha.is_finite() && t.alpha > 0.0) {
            return Err(Error::invalid("truth.alpha must be positive"));
        }
        self.noise_model()?;
        self.constraint_set()?;
        self.solver_config()?.validate(t.d1, t.d2)?;
        if let Some(rule) = &self.constraints.radius_rule {
            if rule != "alpha_sqrt_rank" {
                return Err(Error::invalid(format!("unknown radius rule `{rule}`")));
            }
        }
        Ok(())
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        let kind = match self.noise.kind.as_str() {
            "gaussian" => NoiseKind::Gaussian,
            "laplace" => NoiseKind::Laplace,
            "none" => NoiseKind::None,
            other => return Err(Error::invalid(format!("unknown noise kind `{other}`"))),
        };
        let sigma = if kind == NoiseKind::None { 0.0 } else { self.noise.sigma };
        NoiseModel::new(kind, sigma)
    }

    pub fn distribution(&self) -> Result<SamplingDistribution> {
        let (d1, d2) = (self.truth.d1, self.truth.d2);
        let spec = match &self.sampling {
            SamplingSpec::Uniform => DistributionSpec::Uniform,
            SamplingSpec::Ramp => DistributionSpec::ramp(d1, d2),
            SamplingSpec::Product { rows, cols } => DistributionSpec::Product {
                rows: rows.clone(),
                cols: cols.clone(),
            },
            SamplingSpec::File { path } => {
                let pi = SamplingDistribution::read_from(BufReader::new(File::open(path)?))?;
                if pi.shape() != (d1, d2) {
                    return Err(Error::DimensionMismatch {
                        expected: format!("{d1}x{d2}"),
                        actual: format!("{}x{}", pi.shape().0, pi.shape().1),
                    });
                }
                return Ok(pi);
            }
        };
        spec.build(d1, d2, false)
    }

    pub fn constraint_set(&self) -> Result<ConstraintSet> {
        let alpha = self.constraints.alpha.unwrap_or(self.truth.alpha);
        match self.constraints.radius {
            Some(radius) => ConstraintSet::new(alpha, radius),
            None => ConstraintSet::for_rank(alpha, self.truth.rank),
        }
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let s = &self.solver;
        let d = SolverConfig::default();
        Ok(SolverConfig {
            k: s.k,
            rank_hint: s.rank_hint,
            tau: s.tau,
            max_iters: s.max_iters.unwrap_or(d.max_iters),
            tol: s.tol.unwrap_or(d.tol),
            seed: 0,
            algorithm: match &s.algorithm {
                Some(a) => a.parse::<Algorithm>()?,
                None => d.algorithm,
            },
            epochs: s.epochs.unwrap_or(d.epochs),
            max_halvings: s.max_halvings.unwrap_or(d.max_halvings),
            audit: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 3
n_grid = [100, 200, 400]
replicates = 2
truth.d1 = 10
truth.d2 = 12
truth.rank = 2
noise.kind = "gaussian"
noise.sigma = 0.1
"#;

    #[test]
    fn parses_dotted_keys_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_eq!(cfg.truth.alpha, 1.0);
        assert_eq!(cfg.sampling, SamplingSpec::Uniform);
        let c = cfg.constraint_set().unwrap();
        assert!((c.radius() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(cfg.solver_config().unwrap().algorithm, Algorithm::Pgd);
    }

    #[test]
    fn ramp_sampling_builds_product() {
        let cfg = ExperimentConfig::from_toml_str(&format!("{BASE}sampling.kind = \"ramp\"\n")).unwrap();
        let pi = cfg.distribution().unwrap();
        assert!(pi.prob(9, 11) > pi.prob(0, 0));
        assert!(pi.mu() > 1.0 && pi.mu() < 4.0);
    }

    #[test]
    fn rejects_bad_grids_and_keys() {
        let empty = BASE.replace("n_grid = [100, 200, 400]", "n_grid = []");
        assert!(ExperimentConfig::from_toml_str(&empty).unwrap_err().is_validation());
        let unsorted = BASE.replace("n_grid = [100, 200, 400]", "n_grid = [200, 100]");
        assert!(ExperimentConfig::from_toml_str(&unsorted).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("{BASE}bogus = 1\n")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("{BASE}solver.algorithm = \"sgd\"\n")).is_err());
        let zero_reps = BASE.replace("replicates = 2", "replicates = 0");
        assert!(ExperimentConfig::from_toml_str(&zero_reps).is_err());
    }
}
