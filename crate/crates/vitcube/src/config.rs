//! Run configuration (TOML) and base architecture tables.
//!
//! Every field has a default, so an empty file is a valid configuration.
//!
//! ```toml
//! seed = 7
//! output_dir = "runs/a"
//! base_table = "data/mobilevit_v2.toml"
//!
//! [gp]
//! smoothness = "5/2"
//! restarts = 8
//! max_sweeps = 200
//! # noise_variance = 1e-4   # fix the noise instead of fitting it
//!
//! [jitter]
//! start = 1e-10
//! stop = 1e-6
//! factor = 10.0
//!
//! [snap]
//! resolution = 32
//! channels = 8
//!
//! [select]
//! fraction = 0.2
//! fraction_base = "constrained"   # or "all"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vitcube_core::cost_model::{macs_of, resolve_arch_with, ArchFactors, BaseConfig, SnapUnits};
use vitcube_core::gp::{FitConfig, Smoothness};
use vitcube_core::linalg::JitterLadder;
use vitcube_core::pareto::SelectConfig;

use crate::error::{CliError, CoreContext};

/// The MobileViT V2 (width 1.0) stage table with a 100-class head.
pub const DEFAULT_BASE_TOML: &str = include_str!("../../../data/mobilevit_v2.toml");

pub const MAX_RESTARTS: usize = 64;
pub const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpSettings {
    pub smoothness: Smoothness,
    pub restarts: usize,
    pub max_sweeps: usize,
    pub noise_variance: Option<f64>,
}

impl Default for GpSettings {
    fn default() -> Self {
        let f = FitConfig::default();
        Self { smoothness: f.smoothness, restarts: f.restarts, max_sweeps: f.max_sweeps, noise_variance: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub base_table: Option<PathBuf>,
    pub gp: GpSettings,
    pub jitter: JitterLadder,
    pub snap: SnapUnits,
    pub select: SelectConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: None,
            base_table: None,
            gp: GpSettings::default(),
            jitter: JitterLadder::default(),
            snap: SnapUnits::default(),
            select: SelectConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Data(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
        Self::from_toml(&text).map_err(|e| CliError::file(path, e))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Data(format!("config: {m}")));
        if !(1..=MAX_RESTARTS).contains(&self.gp.restarts) {
            return bad(format!("gp.restarts must be in 1..={MAX_RESTARTS}, got {}", self.gp.restarts));
        }
        if !(1..=MAX_SWEEPS).contains(&self.gp.max_sweeps) {
            return bad(format!("gp.max_sweeps must be in 1..={MAX_SWEEPS}, got {}", self.gp.max_sweeps));
        }
        if let Some(n) = self.gp.noise_variance {
            if !(n >= 0.0 && n.is_finite()) {
                return bad(format!("gp.noise_variance must be finite and nonnegative, got {n}"));
            }
        }
        let f = self.select.fraction;
        if !(f > 0.0 && f <= 1.0) {
            return bad(format!("select.fraction must be in (0, 1], got {f}"));
        }
        self.jitter.validate().context("config")?;
        self.snap.validate().context("config")?;
        Ok(())
    }

    pub fn fit_config(&self, smoothness: Option<Smoothness>) -> FitConfig {
        FitConfig {
            smoothness: smoothness.unwrap_or(self.gp.smoothness),
            restarts: self.gp.restarts,
            max_sweeps: self.gp.max_sweeps,
            seed: self.seed,
            noise_variance: self.gp.noise_variance,
            jitter: self.jitter,
        }
    }
}

/// A base table together with the file it came from, if any.
pub struct Base {
    pub config: BaseConfig,
    pub source: Option<PathBuf>,
}

impl Base {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self { config: parse_base(DEFAULT_BASE_TOML)?, source: None }),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::file(p, e))?;
                let config = parse_base(&text).map_err(|e| CliError::file(p, e))?;
                Ok(Self { config, source: Some(p.to_path_buf()) })
            }
        }
    }

    /// MACs of the identity tuple.
    pub fn baseline_macs(&self, snap: SnapUnits) -> Result<u64, CliError> {
        let arch = resolve_arch_with(&ArchFactors::IDENTITY, &self.config, snap).context("cost model")?;
        Ok(macs_of(&arch, &self.config).context("cost model")?.total)
    }
}

pub fn parse_base(text: &str) -> Result<BaseConfig, CliError> {
    let base: BaseConfig = toml::from_str(text).map_err(|e| CliError::Data(format!("base table: {e}")))?;
    base.validate().context("base table")?;
    Ok(base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c = RunConfig::from_toml("seed = 4\n[gp]\nsmoothness = \"3/2\"\n").unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.gp.smoothness, Smoothness::ThreeHalves);
        assert_eq!(c.gp.restarts, 8);
    }

    #[test]
    fn rejects_out_of_bounds_settings() {
        assert!(RunConfig::from_toml("[gp]\nrestarts = 0\n").is_err());
        assert!(RunConfig::from_toml("[select]\nfraction = 1.5\n").is_err());
        assert!(RunConfig::from_toml("[snap]\nresolution = 0\nchannels = 8\n").is_err());
        assert!(RunConfig::from_toml("unknown = 1\n").is_err());
    }

    #[test]
    fn default_base_parses() {
        let b = Base::load(None).unwrap();
        assert_eq!(b.config.base_resolution, 256);
    }
}
