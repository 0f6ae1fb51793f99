//! Architecture factors, the base stage table, and exact cost accounting.
//!
//! A factor tuple `(r, d_i, d_m, w)` scales a [`BaseConfig`] into a
//! [`ConcreteArch`] ([`resolve_arch`]); [`macs_of`] and [`params_of`] then
//! count multiply-accumulates and weights layer by layer.

mod config;
mod count;
mod resolve;

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use config::{BaseConfig, StageKind, StageSpec};
pub use count::{layer_costs, macs_of, params_of, LayerCost, LayerMacs, MacsBreakdown};
pub use resolve::{implied_factors, resolve_arch, resolve_arch_with, ConcreteArch, SnapUnits, StageArch};

/// One of the four global architecture factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Factor {
    #[serde(rename = "r")]
    Resolution,
    #[serde(rename = "d_i")]
    InvertedResidualDepth,
    #[serde(rename = "d_m")]
    VitDepth,
    #[serde(rename = "w")]
    Width,
}

impl Factor {
    pub const ALL: [Factor; 4] = [Factor::Resolution, Factor::InvertedResidualDepth, Factor::VitDepth, Factor::Width];

    pub fn name(self) -> &'static str {
        match self {
            Factor::Resolution => "r",
            Factor::InvertedResidualDepth => "d_i",
            Factor::VitDepth => "d_m",
            Factor::Width => "w",
        }
    }

    pub fn from_name(name: &str) -> Option<Factor> {
        Factor::ALL.into_iter().find(|f| f.name() == name)
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A point of the 4D factor cube: dimensionless multipliers on input
/// resolution, inverted-residual depth, ViT-block depth and channel width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchFactors {
    pub r: f64,
    pub d_i: f64,
    pub d_m: f64,
    pub w: f64,
}

impl ArchFactors {
    pub const IDENTITY: ArchFactors = ArchFactors { r: 1.0, d_i: 1.0, d_m: 1.0, w: 1.0 };

    pub fn new(r: f64, d_i: f64, d_m: f64, w: f64) -> Result<Self> {
        let f = Self { r, d_i, d_m, w };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        for factor in Factor::ALL {
            let value = self.get(factor);
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidFactor { name: factor.name(), value });
            }
        }
        Ok(())
    }

    pub fn get(&self, factor: Factor) -> f64 {
        match factor {
            Factor::Resolution => self.r,
            Factor::InvertedResidualDepth => self.d_i,
            Factor::VitDepth => self.d_m,
            Factor::Width => self.w,
        }
    }

    pub fn set(&mut self, factor: Factor, value: f64) {
        match factor {
            Factor::Resolution => self.r = value,
            Factor::InvertedResidualDepth => self.d_i = value,
            Factor::VitDepth => self.d_m = value,
            Factor::Width => self.w = value,
        }
    }

    pub fn with(mut self, factor: Factor, value: f64) -> Self {
        self.set(factor, value);
        self
    }

    /// Factors lying outside `envelope`. Informational only.
    pub fn outside_envelope(&self, envelope: &SamplingEnvelope) -> Vec<Factor> {
        Factor::ALL
            .into_iter()
            .filter(|&f| {
                let (lo, hi) = envelope.bounds(f);
                let v = self.get(f);
                v < lo || v > hi
            })
            .collect()
    }
}

impl Default for ArchFactors {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Box of factor values used when sampling architectures for rule fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingEnvelope {
    pub r: (f64, f64),
    pub d_i: (f64, f64),
    pub d_m: (f64, f64),
    pub w: (f64, f64),
}

impl Default for SamplingEnvelope {
    fn default() -> Self {
        Self { r: (0.8, 1.7), d_i: (1.3, 2.3), d_m: (0.8, 1.6), w: (0.4, 1.2) }
    }
}

impl SamplingEnvelope {
    pub fn bounds(&self, factor: Factor) -> (f64, f64) {
        match factor {
            Factor::Resolution => self.r,
            Factor::InvertedResidualDepth => self.d_i,
            Factor::VitDepth => self.d_m,
            Factor::Width => self.w,
        }
    }
}
