//! Spectral rank search.
//!
//! The partially observed matrix is completed crudely by filling each missing cell
//! with its column mean, and the column-wise DFT magnitudes `F` of that fill are
//! the reference profile. For each candidate rank `r = 2..=r_max` the constrained
//! estimator is solved with `alpha = alpha0`, `R = alpha0 * sqrt(r)` and factor
//! width `r + 1`; the candidate's profile `F_r` is the DFT magnitude of its
//! completion, and the rank minimizing `e(r) = ||F - F_r||_F` wins.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::matrix::{ConstraintSet, DenseMatrix};
use crate::sampling::ObservationSet;
use crate::solver::{self, SolverConfig};

/// Observed cells of a `d1 x d2` matrix. Duplicate observations are averaged.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialMatrix {
    d1: usize,
    d2: usize,
    mask: Vec<bool>,
    /// Row-major; zero where unobserved.
    values: Vec<f64>,
}

impl PartialMatrix {
    pub fn new(d1: usize, d2: usize, mask: Vec<bool>, values: Vec<f64>) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::invalid("partial matrix dimensions must be positive"));
        }
        if mask.len() != d1 * d2 || values.len() != d1 * d2 {
            return Err(Error::DimensionMismatch {
                expected: format!("{} cells", d1 * d2),
                actual: format!("mask {}, values {}", mask.len(), values.len()),
            });
        }
        if mask.iter().zip(&values).any(|(&m, v)| m && !v.is_finite()) {
            return Err(Error::invalid("observed value is not finite"));
        }
        let values = mask
            .iter()
            .zip(values)
            .map(|(&m, v)| if m { v } else { 0.0 })
            .collect();
        Ok(Self { d1, d2, mask, values })
    }

    pub fn from_observations(obs: &ObservationSet) -> Self {
        let (d1, d2) = obs.shape();
        let mut sums = vec![0.0; d1 * d2];
        let mut counts = vec![0usize; d1 * d2];
        for ((i, j), y) in obs.iter() {
            sums[i * d2 + j] += y;
            counts[i * d2 + j] += 1;
        }
        let mask = counts.iter().map(|&c| c > 0).collect();
        let values = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect();
        Self { d1, d2, mask, values }
    }

    /// Keeps the cells of `full` where `mask` is set.
    pub fn from_dense(full: &DenseMatrix, mask: Vec<bool>) -> Result<Self> {
        Self::new(full.rows(), full.cols(), mask, full.as_slice().to_vec())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.d2 + j]
    }

    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        self.is_observed(i, j).then(|| self.values[i * self.d2 + j])
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn max_abs_observed(&self) -> f64 {
        self.mask
            .iter()
            .zip(&self.values)
            .filter(|(&m, _)| m)
            .fold(0.0, |acc, (_, v)| acc.max(v.abs()))
    }

    /// One observation per observed cell.
    pub fn to_observations(&self) -> Result<ObservationSet> {
        let mut idx = Vec::new();
        let mut vals = Vec::new();
        for i in 0..self.d1 {
            for j in 0..self.d2 {
                if let Some(v) = self.value(i, j) {
                    idx.push((i, j));
                    vals.push(v);
                }
            }
        }
        ObservationSet::new(self.d1, self.d2, idx, vals)
    }
}

/// Fills each missing cell with the mean of the observed cells in its column.
/// A column without observations takes the mean over all observed cells (zero if
/// nothing is observed at all).
pub fn column_mean_init(p: &PartialMatrix) -> DenseMatrix {
    let (d1, d2) = p.shape();
    let observed: Vec<f64> = (0..d1 * d2)
        .filter(|&c| p.mask[c])
        .map(|c| p.values[c])
        .collect();
    let global = if observed.is_empty() {
        0.0
    } else {
        observed.iter().sum::<f64>() / observed.len() as f64
    };
    let col_means: Vec<f64> = (0..d2)
        .map(|j| {
            let (s, c) = (0..d1)
                .filter_map(|i| p.value(i, j))
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            if c > 0 {
                s / c as f64
            } else {
                global
            }
        })
        .collect();
    DenseMatrix::from_fn(d1, d2, |i, j| p.value(i, j).unwrap_or(col_means[j]))
}

/// Magnitudes of the unnormalized forward DFT of each column.
pub fn spectral_magnitude(m: &DenseMatrix) -> DenseMatrix {
    let (d1, d2) = m.shape();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(d1);
    let mut out = DenseMatrix::zeros(d1, d2);
    let mut buf = vec![Complex64::new(0.0, 0.0); d1];
    for j in 0..d2 {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(m.get(i, j), 0.0);
        }
        fft.process(&mut buf);
        for (i, b) in buf.iter().enumerate() {
            out.set(i, j, b.norm());
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SearchMode {
    /// Candidates `r = 2..=r_max` with `R = alpha0 sqrt(r)`.
    Rank,
    /// Candidates `R = alpha0 sqrt(2) + m * delta` for `m = 0..=r_max-2`. With no delta,
    /// `delta = alpha0 (sqrt(2) - 1)`.
    MaxNorm { delta: Option<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankSearchConfig {
    /// Entry bound. When unset, the largest observed magnitude.
    pub alpha0: Option<f64>,
    pub r_max: usize,
    /// Template for every candidate solve; its factor width is overridden per candidate.
    pub solver: SolverConfig,
    pub mode: SearchMode,
    /// Keep each candidate's spectral profile in the result.
    pub keep_profiles: bool,
}

impl Default for RankSearchConfig {
    fn default() -> Self {
        Self {
            alpha0: None,
            r_max: 6,
            solver: SolverConfig::default(),
            mode: SearchMode::Rank,
            keep_profiles: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    /// Candidate rank; in max-norm mode, the rank implied by `(R / alpha0)^2` rounded up.
    pub r: usize,
    pub radius: f64,
    /// `||F - F_r||_F`, infinite if the solve diverged.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankEstimate {
    pub r_star: usize,
    pub radius_star: f64,
    pub alpha0: f64,
    pub candidates: Vec<Candidate>,
    pub chosen: DenseMatrix,
    pub profile_init: DenseMatrix,
    pub profiles: Option<Vec<DenseMatrix>>,
}

impl RankEstimate {
    /// `(r, e(r))` pairs in search order.
    pub fn errors(&self) -> Vec<(usize, f64)> {
        self.candidates.iter().map(|c| (c.r, c.error)).collect()
    }

    /// Report format: `r,e_r` lines, then `r_star`, then the chosen completion.
    pub fn write_report(&self, mut w: impl Write) -> Result<()> {
        for c in &self.candidates {
            writeln!(w, "{},{}", c.r, c.error)?;
        }
        writeln!(w, "{}", self.r_star)?;
        self.chosen.write_to(w)
    }
}

struct Outcome {
    candidate: Candidate,
    completed: Option<DenseMatrix>,
    profile: Option<DenseMatrix>,
}

pub fn estimate_rank(p: &PartialMatrix, cfg: &RankSearchConfig) -> Result<RankEstimate> {
    let (d1, d2) = p.shape();
    if p.observed_count() == 0 {
        return Err(Error::invalid("no observed entries"));
    }
    if cfg.r_max < 2 || cfg.r_max > d1.min(d2) {
        return Err(Error::invalid(format!(
            "r_max = {} must lie in 2..={}",
            cfg.r_max,
            d1.min(d2)
        )));
    }
    let alpha0 = match cfg.alpha0 {
        Some(a) => a,
        None => p.max_abs_observed(),
    };
    if !(alpha0.is_finite() && alpha0 > 0.0) {
        return Err(Error::invalid(format!("alpha0 must be positive, got {alpha0}")));
    }
    cfg.solver.validate(d1, d2)?;

    let obs = p.to_observations()?;
    let profile_init = spectral_magnitude(&column_mean_init(p));

    let plan: Vec<(usize, f64)> = match cfg.mode {
        SearchMode::Rank => (2..=cfg.r_max)
            .map(|r| (r, alpha0 * (r as f64).sqrt()))
            .collect(),
        SearchMode::MaxNorm { delta } => {
            let delta = delta.unwrap_or(alpha0 * (2f64.sqrt() - 1.0));
            if !(delta.is_finite() && delta > 0.0) {
                return Err(Error::invalid(format!("delta must be positive, got {delta}")));
            }
            (0..=cfg.r_max - 2)
                .map(|m| {
                    let radius = alpha0 * 2f64.sqrt() + m as f64 * delta;
                    let r = ((radius / alpha0).powi(2) - 1e-9).ceil().max(1.0) as usize;
                    (r, radius)
                })
                .collect()
        }
    };

    let outcomes: Vec<Outcome> = plan
        .par_iter()
        .map(|&(r, radius)| solve_candidate(&obs, &profile_init, cfg, alpha0, r, radius))
        .collect::<Result<_>>()?;

    let best = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.completed.is_some())
        .min_by(|(ia, a), (ib, b)| {
            a.candidate
                .error
                .total_cmp(&b.candidate.error)
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Divergence {
            iteration: 0,
            objective: f64::NAN,
        })?;

    let r_star = outcomes[best].candidate.r;
    let radius_star = outcomes[best].candidate.radius;
    let chosen = outcomes[best].completed.clone().expect("finite candidate");
    let candidates = outcomes.iter().map(|o| o.candidate.clone()).collect();
    let profiles = cfg.keep_profiles.then(|| {
        outcomes
            .into_iter()
            .map(|o| o.profile.unwrap_or_else(|| DenseMatrix::zeros(d1, d2)))
            .collect()
    });

    Ok(RankEstimate {
        r_star,
        radius_star,
        alpha0,
        candidates,
        chosen,
        profile_init,
        profiles,
    })
}

fn solve_candidate(
    obs: &ObservationSet,
    profile_init: &DenseMatrix,
    cfg: &RankSearchConfig,
    alpha0: f64,
    r: usize,
    radius: f64,
) -> Result<Outcome> {
    let (d1, d2) = obs.shape();
    let constraints = ConstraintSet::new(alpha0, radius)?;
    let solver_cfg = SolverConfig {
        k: Some((r + 1).min(d1 + d2)),
        ..cfg.solver.clone()
    };
    match solver::fit(obs, &constraints, &solver_cfg) {
        Ok(res) => {
            let profile = spectral_magnitude(&res.completed);
            let error = profile_init.sub(&profile)?.frobenius();
            Ok(Outcome {
                candidate: Candidate { r, radius, error },
                completed: Some(res.completed),
                profile: cfg.keep_profiles.then_some(profile),
            })
        }
        Err(Error::Divergence { .. }) => Ok(Outcome {
            candidate: Candidate {
                r,
                radius,
                error: f64::INFINITY,
            },
            completed: None,
            profile: None,
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_dft_magnitude(col: &[f64]) -> Vec<f64> {
        let n = col.len();
        (0..n)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, x) in col.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                    re += x * ang.cos();
                    im += x * ang.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn fully_observed_init_is_identity() {
        let m = DenseMatrix::from_fn(3, 4, |i, j| (i as f64) - 2.0 * j as f64);
        let p = PartialMatrix::from_dense(&m, vec![true; 12]).unwrap();
        assert_eq!(column_mean_init(&p), m);
    }

    #[test]
    fn missing_cell_takes_column_mean() {
        let m = DenseMatrix::from_rows(&[&[2.0, 1.0], &[4.0, 1.0], &[99.0, 1.0]]);
        let p = PartialMatrix::from_dense(&m, vec![true, true, true, true, false, true]).unwrap();
        let init = column_mean_init(&p);
        assert_eq!(init.get(2, 0), 3.0);
        assert_eq!(init.get(0, 0), 2.0);
    }

    #[test]
    fn empty_column_takes_global_mean() {
        let m = DenseMatrix::from_rows(&[&[1.0, 7.0, 3.0], &[5.0, 7.0, 3.0]]);
        let mask = vec![true, false, true, true, false, false];
        let p = PartialMatrix::from_dense(&m, mask).unwrap();
        let init = column_mean_init(&p);
        // Observed: 1, 3, 5.
        assert_eq!(init.get(0, 1), 3.0);
        assert_eq!(init.get(1, 1), 3.0);
        assert_eq!(init.get(1, 2), 3.0);
        assert_eq!(init.get(1, 0), 5.0);
    }

    #[test]
    fn constant_column_spectrum_is_dc_only() {
        let m = DenseMatrix::from_fn(8, 1, |_, _| -1.5);
        let f = spectral_magnitude(&m);
        assert!((f.get(0, 0) - 12.0).abs() < 1e-12);
        for i in 1..8 {
            assert!(f.get(i, 0).abs() < 1e-12);
        }
        assert_eq!(spectral_magnitude(&DenseMatrix::zeros(5, 3)), DenseMatrix::zeros(5, 3));
    }

    #[test]
    fn spectrum_matches_naive_dft_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for &d1 in &[1usize, 2, 7, 16, 31] {
            let m = DenseMatrix::from_fn(d1, 3, |_, _| rng.random_range(-2.0..2.0));
            let f = spectral_magnitude(&m);
            for j in 0..3 {
                let col = m.column(j);
                let naive = naive_dft_magnitude(&col);
                for i in 0..d1 {
                    assert!((f.get(i, j) - naive[i]).abs() < 1e-9);
                }
                let lhs: f64 = f.column(j).iter().map(|x| x * x).sum();
                let rhs: f64 = d1 as f64 * col.iter().map(|x| x * x).sum::<f64>();
                assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1e-300));
            }
        }
    }

    #[test]
    fn cyclic_shift_preserves_magnitudes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = DenseMatrix::from_fn(12, 4, |_, _| rng.random_range(-1.0..1.0));
        let shifted = DenseMatrix::from_fn(12, 4, |i, j| m.get((i + 5) % 12, j));
        let (a, b) = (spectral_magnitude(&m), spectral_magnitude(&shifted));
        assert!(a.sub(&b).unwrap().linf() < 1e-12);
    }

    #[test]
    fn from_observations_averages_duplicates() {
        let obs = ObservationSet::new(2, 2, vec![(0, 1), (0, 1), (1, 0)], vec![1.0, 3.0, 5.0]).unwrap();
        let p = PartialMatrix::from_observations(&obs);
        assert_eq!(p.value(0, 1), Some(2.0));
        assert_eq!(p.value(0, 0), None);
        assert_eq!(p.observed_count(), 2);
    }

    #[test]
    fn r_max_bounds_checked() {
        let m = DenseMatrix::from_fn(3, 3, |i, j| (i + j) as f64);
        let p = PartialMatrix::from_dense(&m, vec![true; 9]).unwrap();
        for r_max in [1, 4] {
            let cfg = RankSearchConfig {
                r_max,
                ..Default::default()
            };
            assert!(estimate_rank(&p, &cfg).is_err());
        }
    }
}
