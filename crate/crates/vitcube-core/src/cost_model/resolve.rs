use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::config::{BaseConfig, StageKind};
use super::{ArchFactors, Factor};
use crate::{Error, Result};

/// Granularity of resolved integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapUnits {
    /// Input resolution is a multiple of this many pixels.
    pub resolution: u32,
    /// Every channel count is a multiple of this.
    pub channels: u32,
}

impl Default for SnapUnits {
    fn default() -> Self {
        Self { resolution: 32, channels: 8 }
    }
}

impl SnapUnits {
    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 || self.channels == 0 {
            return Err(Error::InvalidConfig(format!("snap units must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Round half up.
fn round_half_up(x: f64) -> u64 {
    let r = libm::floor(x + 0.5);
    if r <= 0.0 {
        0
    } else {
        r as u64
    }
}

/// Nearest multiple of `unit` (ties up), never below `unit`.
fn snap(n: u64, unit: u32) -> u32 {
    let unit = unit as u64;
    let snapped = (2 * n + unit) / (2 * unit) * unit;
    snapped.max(unit) as u32
}

fn snap_scaled(multiplier: f64, base: u32, unit: u32) -> u32 {
    snap(round_half_up(multiplier * base as f64), unit)
}

fn scaled_depth(multiplier: f64, base: u32) -> u32 {
    (round_half_up(multiplier * base as f64) as u32).max(1)
}

fn div_ceil(a: u32, b: u32) -> u32 {
    a.div_ceil(b)
}

/// A resolved stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageArch {
    pub name: String,
    pub kind: StageKind,
    pub layers: u32,
    pub in_channels: u32,
    pub channels: u32,
    pub kernel: u32,
    pub stride: u32,
    /// Hidden width of each inverted-residual block in the stage, in order.
    /// For a mobilevit stage this is the strided opening block, if any.
    pub expanded: Vec<u32>,
    /// Attention embedding dim (mobilevit stages only, else 0).
    pub attn_dim: u32,
    /// FFN hidden width (mobilevit stages only, else 0).
    pub ffn_dim: u32,
    pub patch: u32,
    /// Square side of the stage input feature map.
    pub in_size: u32,
    /// Square side of the stage output feature map.
    pub out_size: u32,
    /// Spatial positions seen by each attention layer (mobilevit stages only):
    /// the feature map padded up to a multiple of the patch size.
    pub tokens: u64,
}

/// A fully integer architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteArch {
    pub input_resolution: u32,
    pub input_channels: u32,
    pub snap: SnapUnits,
    pub stages: Vec<StageArch>,
}

pub fn resolve_arch(factors: &ArchFactors, base: &BaseConfig) -> Result<ConcreteArch> {
    resolve_arch_with(factors, base, SnapUnits::default())
}

/// Resolution is `round(r * base_resolution)` snapped to `snap.resolution`;
/// channel and attention widths are `round(w * base)` snapped to
/// `snap.channels`; layer counts are `max(1, round(d * base))` with `d_i` on
/// inverted-residual stages and `d_m` on mobilevit stages. Rounding is half
/// up, snapping is to the nearest multiple with ties up.
pub fn resolve_arch_with(factors: &ArchFactors, base: &BaseConfig, snap_units: SnapUnits) -> Result<ConcreteArch> {
    factors.validate()?;
    base.validate()?;
    snap_units.validate()?;
    let cu = snap_units.channels;

    let input_resolution = snap_scaled(factors.r, base.base_resolution, snap_units.resolution);
    let mut size = input_resolution;
    let mut in_ch = base.input_channels;
    let mut stages = Vec::with_capacity(base.stages.len());

    for spec in &base.stages {
        let mut stage = StageArch {
            name: spec.name.clone(),
            kind: spec.kind,
            layers: spec.layers,
            in_channels: in_ch,
            channels: spec.channels,
            kernel: spec.kernel,
            stride: spec.stride,
            expanded: Vec::new(),
            attn_dim: 0,
            ffn_dim: 0,
            patch: 0,
            in_size: size,
            out_size: size,
            tokens: 0,
        };
        match spec.kind {
            StageKind::StemConv => {
                stage.channels = snap_scaled(factors.w, spec.channels, cu);
                stage.out_size = div_ceil(size, spec.stride);
            }
            StageKind::InvertedResidual => {
                let e = spec.expansion.unwrap_or(1.0);
                stage.channels = snap_scaled(factors.w, spec.channels, cu);
                stage.layers = scaled_depth(factors.d_i, spec.layers);
                let mut block_in = in_ch;
                for _ in 0..stage.layers {
                    stage.expanded.push(snap_scaled(e, block_in, cu));
                    block_in = stage.channels;
                }
                stage.out_size = div_ceil(size, spec.stride);
            }
            StageKind::MobilevitBlock => {
                stage.channels = snap_scaled(factors.w, spec.channels, cu);
                stage.layers = scaled_depth(factors.d_m, spec.layers);
                stage.attn_dim = snap_scaled(factors.w, spec.attn_dim.unwrap_or(0), cu);
                stage.ffn_dim = snap_scaled(spec.ffn_multiplier.unwrap_or(1.0), stage.attn_dim, cu);
                stage.patch = spec.patch.unwrap_or(1);
                let mut inner = size;
                if spec.stride > 1 {
                    stage.expanded.push(snap_scaled(spec.expansion.unwrap_or(1.0), in_ch, cu));
                    inner = div_ceil(size, spec.stride);
                }
                let padded = div_ceil(inner, stage.patch) * stage.patch;
                stage.out_size = padded;
                stage.tokens = padded as u64 * padded as u64;
            }
            StageKind::Classifier => {
                stage.out_size = 1;
            }
        }
        size = stage.out_size;
        in_ch = stage.channels;
        stages.push(stage);
    }

    Ok(ConcreteArch { input_resolution, input_channels: base.input_channels, snap: snap_units, stages })
}

/// Half-open interval `[lo, hi)` of real `x` with `snap(round(x)) == value`.
fn snapped_preimage(value: u32, unit: u32) -> (f64, f64) {
    let (v, u) = (value as f64, unit as f64);
    let hi = libm::ceil(v + u / 2.0) - 0.5;
    let lo = if value <= unit { f64::NEG_INFINITY } else { libm::ceil(v - u / 2.0) - 0.5 };
    (lo, hi)
}

/// Half-open interval of real `x` with `max(1, round(x)) == layers`.
fn depth_preimage(layers: u32) -> (f64, f64) {
    let l = layers as f64;
    let lo = if layers <= 1 { f64::NEG_INFINITY } else { l - 0.5 };
    (lo, l + 0.5)
}

#[derive(Clone, Copy)]
struct Interval {
    lo: f64,
    hi: f64,
    constrained: bool,
}

impl Interval {
    fn open() -> Self {
        Self { lo: 0.0, hi: f64::INFINITY, constrained: false }
    }

    /// Intersect with the multipliers `m` such that `m * base` lies in `pre`.
    fn restrict(&mut self, pre: (f64, f64), base: u32) {
        let b = base as f64;
        self.lo = self.lo.max(pre.0 / b);
        self.hi = self.hi.min(pre.1 / b);
        self.constrained = true;
    }

    fn representative(&self) -> Option<f64> {
        if !self.constrained {
            return Some(1.0);
        }
        (self.lo < self.hi && self.hi.is_finite()).then(|| 0.5 * (self.lo + self.hi))
    }
}

/// Exact multipliers implied by a resolved architecture: a factor tuple that
/// lies strictly inside the set of tuples resolving to `arch`. Factors that
/// no stage depends on are reported as 1.0.
pub fn implied_factors(arch: &ConcreteArch, base: &BaseConfig) -> Result<ArchFactors> {
    if arch.stages.len() != base.stages.len() {
        return Err(Error::ConfigMismatch(format!(
            "{} resolved stages for {} base stages",
            arch.stages.len(),
            base.stages.len()
        )));
    }
    let cu = arch.snap.channels;
    let mut r = Interval::open();
    r.restrict(snapped_preimage(arch.input_resolution, arch.snap.resolution), base.base_resolution);
    let mut d_i = Interval::open();
    let mut d_m = Interval::open();
    let mut w = Interval::open();

    for (stage, spec) in arch.stages.iter().zip(&base.stages) {
        match spec.kind {
            StageKind::StemConv => w.restrict(snapped_preimage(stage.channels, cu), spec.channels),
            StageKind::InvertedResidual => {
                w.restrict(snapped_preimage(stage.channels, cu), spec.channels);
                d_i.restrict(depth_preimage(stage.layers), spec.layers);
            }
            StageKind::MobilevitBlock => {
                w.restrict(snapped_preimage(stage.channels, cu), spec.channels);
                w.restrict(snapped_preimage(stage.attn_dim, cu), spec.attn_dim.unwrap_or(1));
                d_m.restrict(depth_preimage(stage.layers), spec.layers);
            }
            StageKind::Classifier => {}
        }
    }

    let pick = |iv: Interval, f: Factor| {
        iv.representative().ok_or_else(|| Error::ConfigMismatch(format!("no value of {f} reproduces the architecture")))
    };
    ArchFactors::new(
        pick(r, Factor::Resolution)?,
        pick(d_i, Factor::InvertedResidualDepth)?,
        pick(d_m, Factor::VitDepth)?,
        pick(w, Factor::Width)?,
    )
}
