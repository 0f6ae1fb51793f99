//! Numerical core for exploring the global architecture factors of mobile
//! vision transformers.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every pure computation:
//!
//! * [`cost_model`]: factor tuples `(r, d_i, d_m, w)` to concrete MobileViT V2
//!   style architectures, with exact per-layer MACs and parameter counts.
//! * [`attention`]: reference separable self-attention, a multi-head baseline
//!   and analytical MAC counts for both.
//! * [`gp`]: Gaussian-process regression with Matérn kernels, marginal
//!   likelihood fitting and batched posterior surfaces.
//! * [`pareto`]: nondominated sorting over (MACs, accuracy) records and
//!   constrained top-fraction selection.
//! * [`downsizer`]: the reduction-factor rule that maps a MACs budget to a
//!   recommended factor tuple.
//!
//! File formats, the command line and anything touching the OS live in the
//! companion `vitcube` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod attention;
pub mod cost_model;
pub mod downsizer;
mod error;
pub mod gp;
pub mod linalg;
pub mod pareto;

pub use error::{Error, Result};
