//! Small dense linear algebra: a row-major matrix and a jittered Cholesky
//! factorization. Sized for GP training sets of a few hundred points.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{} values cannot fill a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Rows reordered so that output row `i` is input row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Matrix> {
        if perm.len() != self.rows {
            return Err(Error::Shape(format!("permutation of length {} for {} rows", perm.len(), self.rows)));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(self.row(p));
        }
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Diagonal jitter schedule tried when a covariance matrix fails to factor.
///
/// The first attempt uses no jitter; subsequent attempts add `start`,
/// `start * factor`, ... up to and including `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterLadder {
    pub start: f64,
    pub stop: f64,
    pub factor: f64,
}

impl Default for JitterLadder {
    fn default() -> Self {
        Self { start: 1e-10, stop: 1e-6, factor: 10.0 }
    }
}

impl JitterLadder {
    pub fn validate(&self) -> Result<()> {
        let ok = self.start > 0.0
            && self.stop >= self.start
            && self.factor > 1.0
            && self.start.is_finite()
            && self.stop.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad jitter ladder {self:?}")))
        }
    }

    /// Jitter values in the order they are tried, starting with zero.
    pub fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        let mut next = Some(0.0);
        core::iter::from_fn(move || {
            let cur = next?;
            next = if cur == 0.0 {
                Some(self.start)
            } else {
                let n = cur * self.factor;
                // 1e-10 * 10^4 lands a hair above 1e-6 in floating point
                if n <= self.stop * (1.0 + 1e-9) {
                    Some(n)
                } else {
                    None
                }
            };
            Some(cur)
        })
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A + jitter·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    l: Matrix,
    jitter: f64,
}

impl Cholesky {
    /// Plain factorization; fails on a non-positive or non-finite pivot.
    pub fn factor(a: &Matrix) -> Result<Self> {
        Self::factor_shifted(a, 0.0)
    }

    /// Factor `a`, escalating diagonal jitter along `ladder` on failure.
    pub fn factor_with_jitter(a: &Matrix, ladder: &JitterLadder) -> Result<Self> {
        for jitter in ladder.steps() {
            if let Ok(c) = Self::factor_shifted(a, jitter) {
                return Ok(c);
            }
        }
        Err(Error::Numeric(format!(
            "{}x{} covariance not positive definite after jitter {:e}",
            a.rows, a.cols, ladder.stop
        )))
    }

    fn factor_shifted(a: &Matrix, jitter: f64) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::Shape(format!("cholesky of {}x{} matrix", a.rows, a.cols)));
        }
        let n = a.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)] + jitter;
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::Numeric(format!("non-positive pivot {diag:e} at {j}")));
            }
            let d = libm::sqrt(diag);
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l, jitter })
    }

    pub fn dim(&self) -> usize {
        self.l.rows
    }

    /// Diagonal jitter that was needed for the factorization to succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let row = self.l.row(i);
            let mut s = b[i];
            for k in 0..i {
                s -= row[k] * b[k];
            }
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    /// Solves `(L Lᵀ) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// `log det(L Lᵀ)`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| libm::log(self.l[(i, i)])).sum::<f64>()
    }
}
