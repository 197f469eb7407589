//! Sampling distributions over the index grid and the noisy observation model
//! `Y_t = M0[i_t, j_t] + sigma * xi_t`.
//!
//! Indices are drawn i.i.d. with replacement. Each draw gets its own noise
//! variable, so a cell sampled twice carries two independent observations.

use std::io::{BufRead, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{parse_fields, DenseMatrix};
use crate::rng::{stream, Stream};

/// Tolerance on the total probability mass.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Unnormalized description of a sampling distribution.
#[derive(Clone, Debug, PartialEq)]
pub enum DistributionSpec {
    Uniform,
    /// Row and column weights; `pi_kl` is proportional to `row[k] * col[l]`.
    Product { rows: Vec<f64>, cols: Vec<f64> },
    /// Row-major cell weights.
    Explicit(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DistributionKind {
    Uniform,
    Product {
        row_marginals: Vec<f64>,
        col_marginals: Vec<f64>,
    },
    Explicit,
}

/// A normalized distribution `Pi = {pi_kl}` over `[d1] x [d2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingDistribution {
    d1: usize,
    d2: usize,
    probs: Vec<f64>,
    kind: DistributionKind,
}

impl DistributionSpec {
    /// Product weights `1 + i/d1` on row `i` and `1 + j/d2` on column `j`.
    pub fn ramp(d1: usize, d2: usize) -> Self {
        DistributionSpec::Product {
            rows: (0..d1).map(|i| 1.0 + i as f64 / d1 as f64).collect(),
            cols: (0..d2).map(|j| 1.0 + j as f64 / d2 as f64).collect(),
        }
    }

    /// Normalizes the spec into a distribution. With `require_positive`, any zero cell
    /// is rejected since the lower bound `pi_kl >= 1/(mu d1 d2)` would fail for every mu.
    pub fn build(&self, d1: usize, d2: usize, require_positive: bool) -> Result<SamplingDistribution> {
        make_distribution(self, d1, d2, require_positive)
    }
}

fn normalize(weights: &[f64], what: &str) -> Result<Vec<f64>> {
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::invalid(format!("{what} weight {w} is not a nonnegative number")));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid(format!("{what} weights sum to zero")));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

pub fn make_distribution(
    spec: &DistributionSpec,
    d1: usize,
    d2: usize,
    require_positive: bool,
) -> Result<SamplingDistribution> {
    if d1 == 0 || d2 == 0 {
        return Err(Error::invalid("distribution dimensions must be positive"));
    }
    let cells = d1 * d2;
    let (probs, kind) = match spec {
        DistributionSpec::Uniform => (vec![1.0 / cells as f64; cells], DistributionKind::Uniform),
        DistributionSpec::Product { rows, cols } => {
            if rows.len() != d1 || cols.len() != d2 {
                return Err(Error::DimensionMismatch {
                    expected: format!("marginals of length {d1} and {d2}"),
                    actual: format!("{} and {}", rows.len(), cols.len()),
                });
            }
            let r = normalize(rows, "row")?;
            let c = normalize(cols, "column")?;
            let probs = r.iter().flat_map(|a| c.iter().map(move |b| a * b)).collect();
            (
                probs,
                DistributionKind::Product {
                    row_marginals: r,
                    col_marginals: c,
                },
            )
        }
        DistributionSpec::Explicit(w) => {
            if w.len() != cells {
                return Err(Error::DimensionMismatch {
                    expected: format!("{cells} cell weights"),
                    actual: format!("{}", w.len()),
                });
            }
            (normalize(w, "cell")?, DistributionKind::Explicit)
        }
    };
    if require_positive {
        if let Some(pos) = probs.iter().position(|&p| p <= 0.0) {
            return Err(Error::invalid(format!(
                "cell ({}, {}) has zero probability; every entry must be observable",
                pos / d2,
                pos % d2
            )));
        }
    }
    Ok(SamplingDistribution {
        d1,
        d2,
        probs,
        kind,
    })
}

impl SamplingDistribution {
    pub fn uniform(d1: usize, d2: usize) -> Result<Self> {
        make_distribution(&DistributionSpec::Uniform, d1, d2, true)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    /// Row-major cell probabilities.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, k: usize, l: usize) -> f64 {
        self.probs[k * self.d2 + l]
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    /// `mu = 1 / (d1 d2 min pi)`; infinite if some cell has zero mass.
    pub fn mu(&self) -> f64 {
        let min = self.probs.iter().copied().fold(f64::INFINITY, f64::min);
        1.0 / ((self.d1 * self.d2) as f64 * min)
    }

    /// `L = d1 d2 max pi`.
    pub fn l_factor(&self) -> f64 {
        let max = self.probs.iter().copied().fold(0.0, f64::max);
        (self.d1 * self.d2) as f64 * max
    }

    /// Draws `n` cells i.i.d. with replacement from the sampling stream of `seed`.
    pub fn sample_indices(&self, n: usize, seed: u64) -> Vec<(usize, usize)> {
        let mut rng = stream(seed, Stream::Sampling);
        let cells = self.d1 * self.d2;
        let flat: Vec<usize> = match self.kind {
            DistributionKind::Uniform => (0..n).map(|_| rng.random_range(0..cells)).collect(),
            _ => {
                let dist = WeightedIndex::new(&self.probs).expect("normalized probabilities");
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
        };
        flat.into_iter().map(|c| (c / self.d2, c % self.d2)).collect()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{},{}", self.d1, self.d2)?;
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        match &self.kind {
            DistributionKind::Uniform => writeln!(w, "uniform")?,
            DistributionKind::Product {
                row_marginals,
                col_marginals,
            } => {
                writeln!(w, "product")?;
                writeln!(w, "{}", join(row_marginals))?;
                writeln!(w, "{}", join(col_marginals))?;
            }
            DistributionKind::Explicit => {
                writeln!(w, "explicit")?;
                for row in self.probs.chunks(self.d2) {
                    writeln!(w, "{}", join(row))?;
                }
            }
        }
        Ok(())
    }

    /// Parses the distribution file format. Zero cells are allowed here; callers that
    /// need strictly positive mass check [`SamplingDistribution::mu`].
    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, l)) => Ok((n + 1, l?.trim().to_string())),
                None => Err(Error::parse(0, format!("missing {what}"))),
            }
        };
        let (n, header) = next("header")?;
        let dims = parse_fields::<usize>(&header, n)?;
        if dims.len() != 2 {
            return Err(Error::parse(n, "expected header `d1,d2`"));
        }
        let (d1, d2) = (dims[0], dims[1]);
        let (n, kind) = next("distribution kind")?;
        let spec = match kind.as_str() {
            "uniform" => DistributionSpec::Uniform,
            "product" => {
                let (n1, rows) = next("row marginals")?;
                let (n2, cols) = next("column marginals")?;
                DistributionSpec::Product {
                    rows: parse_fields(&rows, n1)?,
                    cols: parse_fields(&cols, n2)?,
                }
            }
            "explicit" => {
                let mut w = Vec::with_capacity(d1 * d2);
                for _ in 0..d1 {
                    let (ln, row) = next("probability row")?;
                    let vals: Vec<f64> = parse_fields(&row, ln)?;
                    if vals.len() != d2 {
                        return Err(Error::parse(ln, format!("expected {d2} probabilities")));
                    }
                    w.extend(vals);
                }
                DistributionSpec::Explicit(w)
            }
            other => return Err(Error::parse(n, format!("unknown distribution kind `{other}`"))),
        };
        make_distribution(&spec, d1, d2, false)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    /// Laplace with scale `1/sqrt(2)`, i.e. unit variance.
    Laplace,
    None,
}

/// Noise `sigma * xi` with `xi` zero-mean, unit-variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid(format!("noise sigma must be nonnegative, got {sigma}")));
        }
        Ok(Self { kind, sigma })
    }

    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma: 0.0,
        }
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, sigma)
    }

    pub fn laplace(sigma: f64) -> Result<Self> {
        Self::new(NoiseKind::Laplace, sigma)
    }

    /// One standardized draw `xi`.
    pub fn standard_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Gaussian => rng.sample(StandardNormal),
            NoiseKind::Laplace => {
                // Inverse CDF on u in (-1/2, 1/2).
                let u: f64 = rng.random::<f64>() - 0.5;
                let scale = std::f64::consts::FRAC_1_SQRT_2;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
            }
        }
    }

    /// `n` standardized draws from the noise stream of `seed`.
    pub fn standard_draws(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, Stream::Noise);
        (0..n).map(|_| self.standard_draw(&mut rng)).collect()
    }
}

/// Sampled indices `S` with their noisy values `Y_S`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    d1: usize,
    d2: usize,
    indices: Vec<(usize, usize)>,
    values: Vec<f64>,
}

impl ObservationSet {
    pub fn new(d1: usize, d2: usize, indices: Vec<(usize, usize)>, values: Vec<f64>) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::invalid("observation dimensions must be positive"));
        }
        if indices.is_empty() {
            return Err(Error::invalid("observation set is empty"));
        }
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", indices.len()),
                actual: format!("{}", values.len()),
            });
        }
        if let Some(&(i, j)) = indices.iter().find(|&&(i, j)| i >= d1 || j >= d2) {
            return Err(Error::invalid(format!(
                "index ({i}, {j}) out of range for {d1}x{d2}"
            )));
        }
        if let Some(y) = values.iter().find(|y| !y.is_finite()) {
            return Err(Error::invalid(format!("non-finite observation {y}")));
        }
        Ok(Self {
            d1,
            d2,
            indices,
            values,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Largest `|y|`; the fallback for an unknown entry bound.
    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().fold(0.0, |m, y| m.max(y.abs()))
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let mut s = String::with_capacity(self.len() * 24);
        use std::fmt::Write as _;
        writeln!(s, "{},{},{}", self.d1, self.d2, self.len()).unwrap();
        for ((i, j), y) in self.iter() {
            writeln!(s, "{i},{j},{y}").unwrap();
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut header = None;
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::parse(n + 1, "expected three comma-separated fields"));
            }
            let bad = |f: &str| Error::parse(n + 1, format!("cannot parse `{f}`"));
            if header.is_none() {
                let dims: Vec<usize> = fields
                    .iter()
                    .map(|f| f.parse().map_err(|_| bad(f)))
                    .collect::<Result<_>>()?;
                header = Some((dims[0], dims[1], dims[2]));
                continue;
            }
            indices.push((
                fields[0].parse().map_err(|_| bad(fields[0]))?,
                fields[1].parse().map_err(|_| bad(fields[1]))?,
            ));
            values.push(fields[2].parse().map_err(|_| bad(fields[2]))?);
        }
        let (d1, d2, n) = header.ok_or_else(|| Error::parse(0, "missing header `d1,d2,n`"))?;
        if indices.len() != n {
            return Err(Error::parse(
                0,
                format!("header promises {n} observations, found {}", indices.len()),
            ));
        }
        Self::new(d1, d2, indices, values)
    }
}

/// `Y_t = M0[i_t, j_t] + sigma * xi_t`, noise drawn from the noise stream of `seed`.
pub fn observe(
    m0: &DenseMatrix,
    indices: &[(usize, usize)],
    noise: &NoiseModel,
    seed: u64,
) -> Result<ObservationSet> {
    let (d1, d2) = m0.shape();
    if let Some(&(i, j)) = indices.iter().find(|&&(i, j)| i >= d1 || j >= d2) {
        return Err(Error::invalid(format!(
            "index ({i}, {j}) out of range for {d1}x{d2}"
        )));
    }
    let xi = noise.standard_draws(indices.len(), seed);
    let values = indices
        .iter()
        .zip(xi)
        .map(|(&(i, j), x)| m0.get(i, j) + noise.sigma * x)
        .collect();
    ObservationSet::new(d1, d2, indices.to_vec(), values)
}
