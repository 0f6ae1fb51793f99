use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{KernelParams, Smoothness};
use super::model::{covariance_matrix, GpDataset, GpModel};
use crate::linalg::{Cholesky, JitterLadder};
use crate::{Error, Result};

/// Hyperparameter search settings.
///
/// Search happens in log space. Lengthscales range over `[0.05, 20]` times
/// the input range of their dimension, signal variance over `[0.01, 100]`
/// times the target variance, noise variance over `[1e-6, 1]` times the
/// target variance. Start 0 is a fixed heuristic point, the rest are uniform
/// draws inside those bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub smoothness: Smoothness,
    pub restarts: usize,
    /// Coordinate-descent sweeps per start.
    pub max_sweeps: usize,
    pub seed: u64,
    /// Hold the noise variance fixed instead of fitting it.
    pub noise_variance: Option<f64>,
    pub jitter: JitterLadder,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            smoothness: Smoothness::default(),
            restarts: 8,
            max_sweeps: 200,
            seed: 0,
            noise_variance: None,
            jitter: JitterLadder::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_sweeps == 0 {
            return Err(Error::InvalidConfig(format!(
                "restarts and max_sweeps must be positive (got {} and {})",
                self.restarts, self.max_sweeps
            )));
        }
        if let Some(n) = self.noise_variance {
            if !(n >= 0.0) || !n.is_finite() {
                return Err(Error::InvalidConfig(format!("fixed noise variance must be nonnegative, got {n}")));
            }
        }
        self.jitter.validate()
    }
}

/// What the optimizer saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Objective at each start point, `-inf` where the covariance could not
    /// be factored.
    pub start_log_likelihoods: Vec<f64>,
    /// Objective after local search from each start.
    pub final_log_likelihoods: Vec<f64>,
    pub best_start: usize,
    pub log_marginal_likelihood: f64,
}

struct Space {
    dim: usize,
    fit_noise: bool,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Space {
    fn new(data: &GpDataset, fit_noise: bool) -> Self {
        let scale = target_scale(data);
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for j in 0..data.dim() {
            let r = input_scale(data, j);
            lo.push(libm::log(0.05 * r));
            hi.push(libm::log(20.0 * r));
        }
        lo.push(libm::log(1e-2 * scale));
        hi.push(libm::log(1e2 * scale));
        if fit_noise {
            lo.push(libm::log(1e-6 * scale));
            hi.push(libm::log(scale));
        }
        Self { dim: data.dim(), fit_noise, lo, hi }
    }

    fn len(&self) -> usize {
        self.lo.len()
    }

    fn heuristic(&self, data: &GpDataset) -> Vec<f64> {
        let scale = target_scale(data);
        let mut t: Vec<f64> = (0..self.dim).map(|j| libm::log(0.5 * input_scale(data, j))).collect();
        t.push(libm::log(scale));
        if self.fit_noise {
            t.push(libm::log(1e-2 * scale));
        }
        t
    }

    fn decode(&self, theta: &[f64], smoothness: Smoothness, fixed_noise: Option<f64>) -> (KernelParams, f64) {
        let lengthscales = theta[..self.dim].iter().map(|v| libm::exp(*v)).collect();
        let kernel = KernelParams { lengthscales, signal_variance: libm::exp(theta[self.dim]), smoothness };
        let noise = fixed_noise.unwrap_or_else(|| libm::exp(theta[self.dim + 1]));
        (kernel, noise)
    }
}

fn input_scale(data: &GpDataset, j: usize) -> f64 {
    let (lo, hi) = data.input_range(j);
    if hi > lo {
        hi - lo
    } else {
        1.0
    }
}

fn target_scale(data: &GpDataset) -> f64 {
    let v = data.target_variance();
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

fn objective(centered: &GpDataset, kernel: &KernelParams, noise: f64, ladder: &JitterLadder) -> f64 {
    match Cholesky::factor_with_jitter(&covariance_matrix(centered, kernel, noise), ladder) {
        Ok(chol) => {
            let mut v = centered.targets().to_vec();
            chol.solve_lower_in_place(&mut v);
            let quad: f64 = v.iter().map(|t| t * t).sum();
            let lml =
                -0.5 * quad - 0.5 * chol.log_det() - 0.5 * v.len() as f64 * libm::log(2.0 * core::f64::consts::PI);
            if lml.is_finite() {
                lml
            } else {
                f64::NEG_INFINITY
            }
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximizes `f` on `[a, b]`; returns the best interior point found.
fn golden_max(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn local_search(
    mut theta: Vec<f64>,
    space: &Space,
    max_sweeps: usize,
    mut eval: impl FnMut(&[f64]) -> f64,
) -> (Vec<f64>, f64) {
    let mut best = eval(&theta);
    let mut step: Vec<f64> = space.lo.iter().zip(&space.hi).map(|(l, h)| 0.25 * (h - l)).collect();
    let min_step = 1e-4;
    for _ in 0..max_sweeps {
        let before = best;
        for i in 0..space.len() {
            let a = (theta[i] - step[i]).max(space.lo[i]);
            let b = (theta[i] + step[i]).min(space.hi[i]);
            let mut probe = theta.clone();
            let (t, ft) = golden_max(
                |x| {
                    probe[i] = x;
                    eval(&probe)
                },
                a,
                b,
                1e-5,
            );
            if ft > best {
                let width = b - a;
                let at_edge = (t - a) < 0.05 * width || (b - t) < 0.05 * width;
                theta[i] = t;
                best = ft;
                let span = space.hi[i] - space.lo[i];
                step[i] = if at_edge { (2.0 * step[i]).min(span) } else { (0.5 * step[i]).max(min_step) };
            } else {
                step[i] = (0.5 * step[i]).max(min_step);
            }
        }
        let stalled = best - before <= 1e-9 * (1.0 + libm::fabs(best));
        if stalled && step.iter().all(|s| *s <= 4.0 * min_step) {
            break;
        }
        if best == f64::NEG_INFINITY {
            break;
        }
    }
    (theta, best)
}

pub fn fit(data: &GpDataset, config: &FitConfig) -> Result<GpModel> {
    fit_with_report(data, config).map(|(m, _)| m)
}

/// Fits hyperparameters by maximizing the log marginal likelihood of the
/// mean-centered targets, then conditions on the data.
pub fn fit_with_report(data: &GpDataset, config: &FitConfig) -> Result<(GpModel, FitReport)> {
    config.validate()?;
    let offset = data.target_mean();
    if data.len() == 1 {
        let kernel = KernelParams::isotropic(data.dim(), 1.0, 1.0, config.smoothness)?;
        let noise = config.noise_variance.unwrap_or(0.0);
        let model = GpModel::condition_with(data, kernel, noise, offset, config.jitter)?;
        let lml = model.log_marginal_likelihood();
        let report = FitReport {
            start_log_likelihoods: vec![lml],
            final_log_likelihoods: vec![lml],
            best_start: 0,
            log_marginal_likelihood: lml,
        };
        return Ok((model, report));
    }

    let (centered, _) = data.centered();
    let space = Space::new(data, config.noise_variance.is_none());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let eval = |theta: &[f64]| {
        let (k, noise) = space.decode(theta, config.smoothness, config.noise_variance);
        objective(&centered, &k, noise, &config.jitter)
    };

    let mut starts = Vec::with_capacity(config.restarts);
    for s in 0..config.restarts {
        let theta = if s == 0 {
            space
                .heuristic(data)
                .iter()
                .zip(space.lo.iter().zip(&space.hi))
                .map(|(t, (l, h))| t.clamp(*l, *h))
                .collect()
        } else {
            space.lo.iter().zip(&space.hi).map(|(l, h)| rng.gen_range(*l..*h)).collect::<Vec<f64>>()
        };
        starts.push(theta);
    }

    let mut report = FitReport {
        start_log_likelihoods: Vec::with_capacity(starts.len()),
        final_log_likelihoods: Vec::with_capacity(starts.len()),
        best_start: 0,
        log_marginal_likelihood: f64::NEG_INFINITY,
    };
    let mut best_theta = None;
    for (s, theta) in starts.into_iter().enumerate() {
        report.start_log_likelihoods.push(eval(&theta));
        let (theta, lml) = local_search(theta, &space, config.max_sweeps, eval);
        report.final_log_likelihoods.push(lml);
        if lml > report.log_marginal_likelihood {
            report.log_marginal_likelihood = lml;
            report.best_start = s;
            best_theta = Some(theta);
        }
    }
    let theta = best_theta.ok_or_else(|| {
        Error::Numeric(format!("covariance could not be factored from any of {} starts", config.restarts))
    })?;
    let (kernel, noise) = space.decode(&theta, config.smoothness, config.noise_variance);
    let model = GpModel::condition_with(data, kernel, noise, offset, config.jitter)?;
    report.log_marginal_likelihood = model.log_marginal_likelihood();
    Ok((model, report))
}
