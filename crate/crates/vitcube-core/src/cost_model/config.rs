use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageKind {
    StemConv,
    InvertedResidual,
    MobilevitBlock,
    Classifier,
}

impl StageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StageKind::StemConv => "stem-conv",
            StageKind::InvertedResidual => "inverted-residual",
            StageKind::MobilevitBlock => "mobilevit-block",
            StageKind::Classifier => "classifier",
        }
    }
}

fn one() -> u32 {
    1
}

fn three() -> u32 {
    3
}

/// One row of the base stage table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub name: String,
    pub kind: StageKind,
    #[serde(default = "one")]
    pub layers: u32,
    /// Output channels; class count for the classifier.
    pub channels: u32,
    #[serde(default = "one")]
    pub stride: u32,
    #[serde(default = "three")]
    pub kernel: u32,
    /// Hidden expansion ratio of inverted-residual blocks (including the
    /// strided block that opens a mobilevit stage).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attn_dim: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ffn_multiplier: Option<f64>,
}

/// Base architecture: square input side and ordered stage table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseConfig {
    pub base_resolution: u32,
    #[serde(default = "three")]
    pub input_channels: u32,
    pub stages: Vec<StageSpec>,
}

impl BaseConfig {
    /// Product of all stage strides, including the stride of the block that
    /// opens a mobilevit stage.
    pub fn total_downsampling(&self) -> u64 {
        self.stages.iter().map(|s| s.stride as u64).product()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.stages.is_empty() {
            return bad("base config has no stages".into());
        }
        if self.base_resolution == 0 || self.input_channels == 0 {
            return bad("base_resolution and input_channels must be positive".into());
        }
        let mut names = BTreeSet::new();
        for (i, s) in self.stages.iter().enumerate() {
            if !names.insert(s.name.as_str()) {
                return bad(format!("duplicate stage name {:?}", s.name));
            }
            if s.layers < 1 || s.channels < 1 || s.stride < 1 || s.kernel < 1 {
                return bad(format!("stage {:?}: layers, channels, stride and kernel must be >= 1", s.name));
            }
            let positive = |v: Option<f64>| v.is_some_and(|x| x.is_finite() && x > 0.0);
            match s.kind {
                StageKind::StemConv => {}
                StageKind::InvertedResidual => {
                    if !positive(s.expansion) {
                        return bad(format!("stage {:?}: inverted-residual needs expansion > 0", s.name));
                    }
                }
                StageKind::MobilevitBlock => {
                    if s.attn_dim.unwrap_or(0) == 0 || s.patch.unwrap_or(0) == 0 {
                        return bad(format!("stage {:?}: mobilevit-block needs attn_dim and patch", s.name));
                    }
                    if !positive(s.ffn_multiplier) {
                        return bad(format!("stage {:?}: mobilevit-block needs ffn_multiplier > 0", s.name));
                    }
                    if s.stride > 1 && !positive(s.expansion) {
                        return bad(format!("stage {:?}: strided mobilevit-block needs expansion > 0", s.name));
                    }
                }
                StageKind::Classifier => {
                    if i + 1 != self.stages.len() {
                        return bad(format!("classifier {:?} must be the last stage", s.name));
                    }
                }
            }
        }
        let down = self.total_downsampling();
        if self.base_resolution as u64 % down != 0 {
            return bad(format!(
                "base_resolution {} is not divisible by total downsampling {down}",
                self.base_resolution
            ));
        }
        Ok(())
    }
}
