//! Gaussian-process regression with Matérn kernels.
//!
//! Targets are centered on their mean before conditioning and the mean is
//! added back at prediction time. The posterior mean at `c*` is
//! `k*ᵀ (K + σ²I)⁻¹ y + offset` and the predictive variance is
//! `k(c*, c*) + σ² − k*ᵀ (K + σ²I)⁻¹ k*`, clamped at zero.

mod fit;
mod grid;
mod kernel;
mod model;

pub use fit::{fit, fit_with_report, FitConfig, FitReport};
pub use grid::{argmax_posterior, linspace, predict_grid, GridArgmax, PosteriorSurface};
pub use kernel::{matern_kernel, KernelParams, Smoothness};
pub use model::{
    covariance_matrix, log_marginal_likelihood, log_marginal_likelihood_with, GpDataset, GpModel, GpSnapshot,
    Prediction, DUPLICATE_TOLERANCE,
};
