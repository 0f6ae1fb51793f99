use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::kernel::{matern_kernel, KernelParams};
use crate::linalg::{Cholesky, JitterLadder, Matrix};
use crate::{Error, Result};

/// Inputs closer than this (max-norm) are treated as the same point.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Training set with 1 or 2 input dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct GpDataset {
    dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl GpDataset {
    /// Builds a dataset from input rows. Rows that coincide within
    /// [`DUPLICATE_TOLERANCE`] are merged and their targets averaged.
    pub fn new<R: AsRef<[f64]>>(rows: &[R], targets: &[f64]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if rows.len() != targets.len() {
            return Err(Error::Shape(format!("{} input rows but {} targets", rows.len(), targets.len())));
        }
        let dim = rows[0].as_ref().len();
        if !(1..=2).contains(&dim) {
            return Err(Error::Shape(format!("input dimension must be 1 or 2, got {dim}")));
        }
        let mut merged: Vec<(Vec<f64>, f64, usize)> = Vec::new();
        for (i, (row, &y)) in rows.iter().zip(targets).enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::Shape(format!("row {i} has {} inputs, expected {dim}", row.len())));
            }
            if !row.iter().all(|v| v.is_finite()) || !y.is_finite() {
                return Err(Error::Input(format!("non-finite value in row {i}")));
            }
            let dup = merged
                .iter_mut()
                .find(|(x, _, _)| x.iter().zip(row).all(|(a, b)| libm::fabs(a - b) <= DUPLICATE_TOLERANCE));
            match dup {
                Some((_, sum, count)) => {
                    *sum += y;
                    *count += 1;
                }
                None => merged.push((row.to_vec(), y, 1)),
            }
        }
        let mut inputs = Vec::with_capacity(merged.len() * dim);
        let mut ys = Vec::with_capacity(merged.len());
        for (x, sum, count) in merged {
            inputs.extend_from_slice(&x);
            ys.push(sum / count as f64);
        }
        Ok(Self { dim, inputs, targets: ys })
    }

    pub fn from_1d(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let rows: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
        Self::new(&rows, ys)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn inputs(&self) -> impl Iterator<Item = &[f64]> {
        self.inputs.chunks_exact(self.dim)
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn target_mean(&self) -> f64 {
        self.targets.iter().sum::<f64>() / self.len() as f64
    }

    /// Population variance of the targets.
    pub fn target_variance(&self) -> f64 {
        let m = self.target_mean();
        self.targets.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / self.len() as f64
    }

    /// `(min, max)` of input column `j`.
    pub fn input_range(&self, j: usize) -> (f64, f64) {
        self.inputs().map(|x| x[j]).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    fn with_targets(&self, targets: Vec<f64>) -> Self {
        Self { dim: self.dim, inputs: self.inputs.clone(), targets }
    }
}

/// `K + noise·I` over the dataset inputs.
pub fn covariance_matrix(data: &GpDataset, kernel: &KernelParams, noise: f64) -> Matrix {
    let n = data.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = kernel.signal_variance + noise;
        for j in 0..i {
            let v = matern_kernel(data.input(i), data.input(j), kernel);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn check_compatible(data: &GpDataset, kernel: &KernelParams, noise: f64) -> Result<()> {
    kernel.validate()?;
    if kernel.dim() != data.dim() {
        return Err(Error::Shape(format!(
            "kernel has {} lengthscales for {}-dimensional inputs",
            kernel.dim(),
            data.dim()
        )));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::InvalidConfig(format!("noise variance must be nonnegative, got {noise}")));
    }
    Ok(())
}

fn lml_from(chol: &Cholesky, y: &[f64]) -> f64 {
    let mut v = y.to_vec();
    chol.solve_lower_in_place(&mut v);
    let quad: f64 = v.iter().map(|t| t * t).sum();
    -0.5 * quad - 0.5 * chol.log_det() - 0.5 * y.len() as f64 * LN_2PI
}

/// Log marginal likelihood of the targets exactly as stored (no centering)
/// under a zero-mean GP prior.
pub fn log_marginal_likelihood(data: &GpDataset, kernel: &KernelParams, noise: f64) -> Result<f64> {
    log_marginal_likelihood_with(data, kernel, noise, &JitterLadder::default())
}

pub fn log_marginal_likelihood_with(
    data: &GpDataset,
    kernel: &KernelParams,
    noise: f64,
    ladder: &JitterLadder,
) -> Result<f64> {
    check_compatible(data, kernel, noise)?;
    let chol = Cholesky::factor_with_jitter(&covariance_matrix(data, kernel, noise), ladder)?;
    Ok(lml_from(&chol, data.targets()))
}

/// Posterior mean and variance at one query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn std_dev(&self) -> f64 {
        libm::sqrt(self.variance)
    }

    /// `mean ± 1.96·σ`.
    pub fn ci95(&self) -> (f64, f64) {
        let h = 1.96 * self.std_dev();
        (self.mean - h, self.mean + h)
    }
}

/// A conditioned GP. Immutable once built, so it can be shared across
/// threads for prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GpSnapshot", into = "GpSnapshot")]
pub struct GpModel {
    kernel: KernelParams,
    noise_variance: f64,
    data: GpDataset,
    offset: f64,
    ladder: JitterLadder,
    chol: Cholesky,
    alpha: Vec<f64>,
}

impl GpModel {
    /// Conditions on `data` with fixed hyperparameters. Targets are centered
    /// on their mean, which is added back at prediction.
    pub fn condition(data: &GpDataset, kernel: KernelParams, noise: f64) -> Result<Self> {
        Self::condition_with(data, kernel, noise, data.target_mean(), JitterLadder::default())
    }

    pub fn condition_with(
        data: &GpDataset,
        kernel: KernelParams,
        noise: f64,
        offset: f64,
        ladder: JitterLadder,
    ) -> Result<Self> {
        check_compatible(data, &kernel, noise)?;
        ladder.validate()?;
        if !offset.is_finite() {
            return Err(Error::InvalidConfig(format!("offset must be finite, got {offset}")));
        }
        let chol = Cholesky::factor_with_jitter(&covariance_matrix(data, &kernel, noise), &ladder)?;
        let centered: Vec<f64> = data.targets().iter().map(|y| y - offset).collect();
        let alpha = chol.solve(&centered);
        Ok(Self { kernel, noise_variance: noise, data: data.clone(), offset, ladder, chol, alpha })
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dataset(&self) -> &GpDataset {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    /// Diagonal jitter the factorization needed.
    pub fn jitter(&self) -> f64 {
        self.chol.jitter()
    }

    pub fn jitter_ladder(&self) -> &JitterLadder {
        &self.ladder
    }

    /// Log marginal likelihood of the centered targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let centered: Vec<f64> = self.data.targets().iter().map(|y| y - self.offset).collect();
        lml_from(&self.chol, &centered)
    }

    pub fn predict(&self, query: &[f64]) -> Result<Prediction> {
        let mut buf = Vec::with_capacity(self.data.len());
        self.predict_with(query, &mut buf)
    }

    /// Like [`predict`](Self::predict) but reuses `buf` for the
    /// cross-covariance vector.
    pub fn predict_with(&self, query: &[f64], buf: &mut Vec<f64>) -> Result<Prediction> {
        if query.len() != self.dim() {
            return Err(Error::Shape(format!("query has {} coordinates, model expects {}", query.len(), self.dim())));
        }
        if !query.iter().all(|v| v.is_finite()) {
            return Err(Error::Input(format!("non-finite query {query:?}")));
        }
        Ok(self.predict_unchecked(query, buf))
    }

    pub(crate) fn predict_unchecked(&self, query: &[f64], buf: &mut Vec<f64>) -> Prediction {
        buf.clear();
        buf.extend(self.data.inputs().map(|x| matern_kernel(x, query, &self.kernel)));
        let mean = buf.iter().zip(&self.alpha).map(|(k, a)| k * a).sum::<f64>() + self.offset;
        self.chol.solve_lower_in_place(buf);
        let explained: f64 = buf.iter().map(|v| v * v).sum();
        let variance = (self.kernel.signal_variance + self.noise_variance - explained).max(0.0);
        Prediction { mean, variance }
    }
}

/// Serialized form of a [`GpModel`]; the factorization is rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpSnapshot {
    pub kernel: KernelParams,
    pub noise_variance: f64,
    pub offset: f64,
    #[serde(default)]
    pub jitter_ladder: JitterLadder,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl From<GpModel> for GpSnapshot {
    fn from(m: GpModel) -> Self {
        Self {
            inputs: m.data.inputs().map(<[f64]>::to_vec).collect(),
            targets: m.data.targets.clone(),
            kernel: m.kernel,
            noise_variance: m.noise_variance,
            offset: m.offset,
            jitter_ladder: m.ladder,
        }
    }
}

impl TryFrom<GpSnapshot> for GpModel {
    type Error = Error;

    fn try_from(s: GpSnapshot) -> Result<Self> {
        let data = GpDataset::new(&s.inputs, &s.targets)?;
        GpModel::condition_with(&data, s.kernel, s.noise_variance, s.offset, s.jitter_ladder)
    }
}

impl GpDataset {
    pub(crate) fn centered(&self) -> (Self, f64) {
        let m = self.target_mean();
        (self.with_targets(self.targets.iter().map(|y| y - m).collect()), m)
    }
}
