//! Dense matrix and factor-pair value types, plus the plain-text matrix format.
//!
//! The on-disk format is a header line `d1,d2` followed by `d1` lines of `d2`
//! comma-separated decimals. Values are written with the shortest decimal
//! representation that parses back to the identical `f64`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Real `d1 x d2` matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries, rejecting empty shapes and non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                actual: format!("{} entries", data.len()),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from nested rows. Panics on ragged input; intended for literals.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, data).expect("valid literal matrix")
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// Elementwise difference `self - other`.
    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// `self * other^T`; both operands share the column count.
    pub fn mul_transpose(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.cols, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a, other.row(j));
            }
        }
        out
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    /// Largest absolute entry.
    pub fn linf(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Largest Euclidean row norm, `||A||_{2,inf}`.
    pub fn max_row_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| dot(self.row(i), self.row(i)))
            .fold(0.0_f64, f64::max)
            .sqrt()
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn check_same_shape(&self, other: &DenseMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                actual: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(())
    }

    /// Serializes in the `d1,d2` + rows text format.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.data.len() * 20);
        writeln!(s, "{},{}", self.rows, self.cols).unwrap();
        for i in 0..self.rows {
            let mut first = true;
            for &v in self.row(i) {
                if !first {
                    s.push(',');
                }
                first = false;
                write!(s, "{v}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (rows, cols) = loop {
            match lines.next() {
                Some((n, line)) => {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let dims = parse_fields::<usize>(&line, n + 1)?;
                    if dims.len() != 2 {
                        return Err(Error::parse(n + 1, "expected header `d1,d2`"));
                    }
                    break (dims[0], dims[1]);
                }
                None => return Err(Error::parse(0, "empty matrix file")),
            }
        };
        Self::read_body(rows, cols, &mut lines)
    }

    /// Reads `rows` data lines of `cols` values from an already-positioned line iterator.
    pub(crate) fn read_body(
        rows: usize,
        cols: usize,
        lines: &mut impl Iterator<Item = (usize, std::io::Result<String>)>,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        let mut read = 0;
        while read < rows {
            let (n, line) = lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("expected {rows} rows, found {read}")))?;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = parse_fields::<f64>(&line, n + 1)?;
            if vals.len() != cols {
                return Err(Error::parse(
                    n + 1,
                    format!("expected {cols} values, found {}", vals.len()),
                ));
            }
            data.extend(vals);
            read += 1;
        }
        Self::new(rows, cols, data)
    }
}

pub(crate) fn parse_fields<T: std::str::FromStr>(line: &str, lineno: usize) -> Result<Vec<T>> {
    line.split(',')
        .map(|f| {
            f.trim()
                .parse::<T>()
                .map_err(|_| Error::parse(lineno, format!("cannot parse `{}`", f.trim())))
        })
        .collect()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Factor pair `(U, V)` representing `M = U V^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Factorization {
    u: DenseMatrix,
    v: DenseMatrix,
}

impl Factorization {
    pub fn new(u: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        if u.cols() != v.cols() {
            return Err(Error::DimensionMismatch {
                expected: format!("V with {} columns", u.cols()),
                actual: format!("{} columns", v.cols()),
            });
        }
        Ok(Self { u, v })
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut DenseMatrix, &mut DenseMatrix) {
        (&mut self.u, &mut self.v)
    }

    pub fn into_parts(self) -> (DenseMatrix, DenseMatrix) {
        (self.u, self.v)
    }

    /// Factor width `k`.
    pub fn width(&self) -> usize {
        self.u.cols()
    }

    /// Shape `(d1, d2)` of the represented matrix.
    pub fn product_shape(&self) -> (usize, usize) {
        (self.u.rows(), self.v.rows())
    }

    pub fn product(&self) -> DenseMatrix {
        self.u.mul_transpose(&self.v)
    }

    /// Single entry `U_i . V_j` without forming the product.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        dot(self.u.row(i), self.v.row(j))
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// The feasible set `K(alpha, R)`: entries bounded by `alpha`, max-norm bounded by `R`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintSet {
    alpha: f64,
    radius: f64,
}

impl ConstraintSet {
    pub fn new(alpha: f64, radius: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!("radius must be positive, got {radius}")));
        }
        if radius < alpha {
            return Err(Error::invalid(format!(
                "radius {radius} below alpha {alpha}: the constraint set is empty"
            )));
        }
        Ok(Self { alpha, radius })
    }

    /// `K(alpha, alpha * sqrt(rank))`, which contains every rank-`rank` matrix with
    /// entries bounded by `alpha`.
    pub fn for_rank(alpha: f64, rank: usize) -> Result<Self> {
        Self::new(alpha, alpha * (rank.max(1) as f64).sqrt())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}
