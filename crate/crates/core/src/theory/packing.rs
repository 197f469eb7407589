use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::{stream, Stream};

use super::KeyValueReport;

#[derive(Clone, Debug, PartialEq)]
pub struct PackingConfig {
    pub d1: usize,
    pub d2: usize,
    pub alpha: f64,
    pub gamma: f64,
    /// `(R / alpha)^2`.
    pub r: f64,
    /// Upper limit on the number of matrices actually drawn.
    pub count_cap: usize,
}

impl PackingConfig {
    pub fn new(d1: usize, d2: usize, alpha: f64, gamma: f64, r: f64, count_cap: usize) -> Result<Self> {
        let cfg = Self {
            d1,
            d2,
            alpha,
            gamma,
            r,
            count_cap,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Configuration for the ball of radius `radius`, so `r = (radius / alpha)^2`.
    pub fn for_radius(d1: usize, d2: usize, alpha: f64, radius: f64, gamma: f64, count_cap: usize) -> Result<Self> {
        Self::new(d1, d2, alpha, gamma, (radius / alpha).powi(2), count_cap)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 || self.d2 == 0 {
            return Err(Error::invalid("packing dimensions must be positive"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::invalid(format!("r must be positive, got {}", self.r)));
        }
        if self.count_cap == 0 {
            return Err(Error::invalid("count_cap must be at least 1"));
        }
        self.block_rows().map(|_| ())
    }

    /// Block height `B = r / gamma^2`; must be an integer in `1..=min(d1, d2)`.
    pub fn block_rows(&self) -> Result<usize> {
        let b = self.r / (self.gamma * self.gamma);
        let rounded = b.round();
        if (b - rounded).abs() > 1e-9 * rounded.max(1.0) || rounded < 1.0 {
            return Err(Error::invalid(format!("r / gamma^2 = {b} is not a positive integer")));
        }
        let b = rounded as usize;
        if b > self.d1.min(self.d2) {
            return Err(Error::invalid(format!(
                "block height {b} exceeds min(d1, d2) = {}",
                self.d1.min(self.d2)
            )));
        }
        Ok(b)
    }

    /// Set size `floor(exp(r max(d1, d2) / (16 gamma^2))) + 1`, saturating at `f64::INFINITY`.
    pub fn theoretical_count(&self) -> f64 {
        let x = self.r * self.d1.max(self.d2) as f64 / (16.0 * self.gamma * self.gamma);
        x.exp().floor() + 1.0
    }

    /// Number of matrices drawn: the theoretical size limited by `count_cap`.
    pub fn count(&self) -> usize {
        let n = self.theoretical_count();
        if n >= self.count_cap as f64 {
            self.count_cap
        } else {
            n as usize
        }
    }
}

/// Draws the random packing family.
///
/// Working in the orientation with at least as many columns as rows, each matrix
/// has a `B x long` block of independent signs scaled by `alpha gamma`, and row `k`
/// repeats block row `k mod B`. Tall shapes are generated transposed and flipped back.
pub fn packing_generate(cfg: &PackingConfig, seed: u64) -> Result<Vec<DenseMatrix>> {
    cfg.validate()?;
    let b = cfg.block_rows()?;
    let tall = cfg.d1 > cfg.d2;
    let (short, long) = if tall { (cfg.d2, cfg.d1) } else { (cfg.d1, cfg.d2) };
    let level = cfg.alpha * cfg.gamma;
    let mut rng = stream(seed, Stream::Packing);

    let out = (0..cfg.count())
        .map(|_| {
            let block: Vec<f64> = (0..b * long)
                .map(|_| if rng.random::<bool>() { level } else { -level })
                .collect();
            let m = DenseMatrix::from_fn(short, long, |k, l| block[(k % b) * long + l]);
            if tall {
                m.transpose()
            } else {
                m
            }
        })
        .collect();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PackingReport {
    pub count: usize,
    /// Smallest `||M_k - M_l||_F^2 / (d1 d2)` over pairs; infinite for a single matrix.
    pub min_sq_distance: f64,
    /// `gamma^2 alpha^2 / 2`.
    pub threshold: f64,
    /// Every pair is strictly farther apart than the threshold.
    pub separated: bool,
    /// First pair (in lexicographic order) at or below the threshold.
    pub offending_pair: Option<(usize, usize)>,
    /// Per matrix: all entries equal `+-gamma alpha`, so the entrywise maximum is
    /// `gamma alpha` and the mean square is `gamma^2 alpha^2`.
    pub levels_exact: Vec<bool>,
}

impl PackingReport {
    pub fn all_levels_exact(&self) -> bool {
        self.levels_exact.iter().all(|&b| b)
    }

    pub fn passed(&self) -> bool {
        self.separated && self.all_levels_exact()
    }
}

impl KeyValueReport for PackingReport {
    fn entries(&self) -> Vec<(&'static str, String)> {
        let offending = match self.offending_pair {
            Some((a, b)) => format!("{a},{b}"),
            None => "none".to_string(),
        };
        vec![
            ("count", self.count.to_string()),
            ("min_sq_distance", self.min_sq_distance.to_string()),
            ("threshold", self.threshold.to_string()),
            ("separated", self.separated.to_string()),
            ("offending_pair", offending),
            (
                "levels_exact",
                self.levels_exact.iter().filter(|&&b| b).count().to_string(),
            ),
            ("passed", self.passed().to_string()),
        ]
    }
}

pub fn packing_verify(set: &[DenseMatrix], alpha: f64, gamma: f64) -> Result<PackingReport> {
    let first = set.first().ok_or_else(|| Error::invalid("packing set is empty"))?;
    let (d1, d2) = first.shape();
    if let Some(bad) = set.iter().find(|m| m.shape() != (d1, d2)) {
        return Err(Error::DimensionMismatch {
            expected: format!("{d1}x{d2}"),
            actual: format!("{}x{}", bad.rows(), bad.cols()),
        });
    }
    let level = alpha * gamma;
    let threshold = gamma * gamma * alpha * alpha / 2.0;
    let cells = (d1 * d2) as f64;

    let levels_exact = set
        .iter()
        .map(|m| m.as_slice().iter().all(|x| x.abs() == level))
        .collect();

    let mut min_sq_distance = f64::INFINITY;
    let mut offending_pair = None;
    for a in 0..set.len() {
        for b in a + 1..set.len() {
            let dist = set[a]
                .as_slice()
                .iter()
                .zip(set[b].as_slice())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                / cells;
            min_sq_distance = min_sq_distance.min(dist);
            if offending_pair.is_none() && !(dist > threshold) {
                offending_pair = Some((a, b));
            }
        }
    }

    Ok(PackingReport {
        count: set.len(),
        min_sq_distance,
        threshold,
        separated: offending_pair.is_none(),
        offending_pair,
        levels_exact,
    })
}
