use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::config::{BaseConfig, StageKind};
use super::resolve::{ConcreteArch, StageArch};
use crate::attention::{attention_macs, AttentionKind};
use crate::{Error, Result};

/// Cost of one weighted layer. Norms and activations carry parameters but
/// no MACs; norm parameters are folded into the layer they follow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCost {
    pub label: String,
    pub macs: u64,
    pub params: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerMacs {
    pub label: String,
    pub macs: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacsBreakdown {
    pub layers: Vec<LayerMacs>,
    pub total: u64,
    pub parameter_total: u64,
}

struct Conv {
    out_size: u32,
    in_ch: u32,
    out_ch: u32,
    kernel: u32,
    groups: u32,
    bias: bool,
    norm: bool,
}

impl Conv {
    fn cost(&self, label: String) -> LayerCost {
        let k2 = (self.kernel as u64).pow(2);
        let per_position = self.out_ch as u64 * k2 * (self.in_ch / self.groups) as u64;
        let hw = (self.out_size as u64).pow(2);
        let mut params = per_position;
        if self.bias {
            params += self.out_ch as u64;
        }
        if self.norm {
            params += 2 * self.out_ch as u64;
        }
        LayerCost { label, macs: hw * per_position, params }
    }
}

fn pointwise(out_size: u32, in_ch: u32, out_ch: u32, bias: bool, norm: bool) -> Conv {
    Conv { out_size, in_ch, out_ch, kernel: 1, groups: 1, bias, norm }
}

/// Expand (skipped when the hidden width equals the input width), depthwise,
/// project.
fn inverted_residual(
    out: &mut Vec<LayerCost>,
    prefix: &str,
    in_size: u32,
    out_size: u32,
    in_ch: u32,
    hidden: u32,
    out_ch: u32,
    kernel: u32,
) {
    if hidden != in_ch {
        out.push(pointwise(in_size, in_ch, hidden, false, true).cost(format!("{prefix}.expand")));
    }
    out.push(
        Conv { out_size, in_ch: hidden, out_ch: hidden, kernel, groups: hidden, bias: false, norm: true }
            .cost(format!("{prefix}.depthwise")),
    );
    out.push(pointwise(out_size, hidden, out_ch, false, true).cost(format!("{prefix}.project")));
}

fn stage_costs(stage: &StageArch, out: &mut Vec<LayerCost>) {
    let name = &stage.name;
    match stage.kind {
        StageKind::StemConv => {
            let mut in_ch = stage.in_channels;
            let mut size = stage.in_size;
            for i in 0..stage.layers {
                let stride = if i == 0 { stage.stride } else { 1 };
                let out_size = size.div_ceil(stride);
                let conv = Conv {
                    out_size,
                    in_ch,
                    out_ch: stage.channels,
                    kernel: stage.kernel,
                    groups: 1,
                    bias: false,
                    norm: true,
                };
                out.push(conv.cost(format!("{name}.{i}.conv")));
                in_ch = stage.channels;
                size = out_size;
            }
        }
        StageKind::InvertedResidual => {
            let mut in_ch = stage.in_channels;
            let mut size = stage.in_size;
            for (i, &hidden) in stage.expanded.iter().enumerate() {
                let out_size = if i == 0 { size.div_ceil(stage.stride) } else { size };
                let prefix = format!("{name}.{i}");
                inverted_residual(out, &prefix, size, out_size, in_ch, hidden, stage.channels, stage.kernel);
                in_ch = stage.channels;
                size = out_size;
            }
        }
        StageKind::MobilevitBlock => {
            let c = stage.channels;
            if let Some(&hidden) = stage.expanded.first() {
                let size = stage.in_size;
                let out_size = size.div_ceil(stage.stride);
                let prefix = format!("{name}.down");
                inverted_residual(out, &prefix, size, out_size, stage.in_channels, hidden, c, stage.kernel);
            }
            // the block runs on the feature map padded to a multiple of the patch size
            let p = stage.out_size;
            let d = stage.attn_dim;
            let l = stage.tokens;
            out.push(
                Conv { out_size: p, in_ch: c, out_ch: c, kernel: stage.kernel, groups: c, bias: false, norm: true }
                    .cost(format!("{name}.local.depthwise")),
            );
            out.push(pointwise(p, c, d, false, false).cost(format!("{name}.local.pointwise")));
            let (d64, f64_) = (d as u64, stage.ffn_dim as u64);
            for j in 0..stage.layers {
                // pre-norm + fused [W_I | W_Q | W_V] projection with bias + W_L with bias
                let attn_params = 2 * d64 + d64 * (1 + 2 * d64) + (1 + 2 * d64) + d64 * d64 + d64;
                out.push(LayerCost {
                    label: format!("{name}.attn{j}.attention"),
                    macs: attention_macs(l, d64, AttentionKind::Separable),
                    params: attn_params,
                });
                out.push(LayerCost {
                    label: format!("{name}.attn{j}.ffn_in"),
                    macs: l * d64 * f64_,
                    params: 2 * d64 + d64 * f64_ + f64_,
                });
                out.push(LayerCost {
                    label: format!("{name}.attn{j}.ffn_out"),
                    macs: l * f64_ * d64,
                    params: f64_ * d64 + d64,
                });
            }
            let mut proj = pointwise(p, d, c, false, true).cost(format!("{name}.proj"));
            // final norm after the attention stack
            proj.params += 2 * d64;
            out.push(proj);
        }
        StageKind::Classifier => {
            let (cin, classes) = (stage.in_channels as u64, stage.channels as u64);
            out.push(LayerCost {
                label: format!("{name}.linear"),
                macs: cin * classes,
                params: cin * classes + classes,
            });
        }
    }
}

fn check_consistent(arch: &ConcreteArch, base: &BaseConfig) -> Result<()> {
    if arch.stages.len() != base.stages.len() {
        return Err(Error::ConfigMismatch(format!(
            "{} resolved stages for {} base stages",
            arch.stages.len(),
            base.stages.len()
        )));
    }
    for (a, b) in arch.stages.iter().zip(&base.stages) {
        if a.name != b.name || a.kind != b.kind {
            return Err(Error::ConfigMismatch(format!(
                "resolved stage {:?} ({}) vs base stage {:?} ({})",
                a.name,
                a.kind.as_str(),
                b.name,
                b.kind.as_str()
            )));
        }
    }
    Ok(())
}

/// Every weighted layer of `arch`, in forward order.
pub fn layer_costs(arch: &ConcreteArch, base: &BaseConfig) -> Result<Vec<LayerCost>> {
    check_consistent(arch, base)?;
    let mut out = Vec::new();
    for stage in &arch.stages {
        stage_costs(stage, &mut out);
    }
    Ok(out)
}

pub fn macs_of(arch: &ConcreteArch, base: &BaseConfig) -> Result<MacsBreakdown> {
    let costs = layer_costs(arch, base)?;
    let total = costs.iter().map(|c| c.macs).sum();
    let parameter_total = costs.iter().map(|c| c.params).sum();
    let layers = costs.into_iter().map(|c| LayerMacs { label: c.label, macs: c.macs }).collect();
    Ok(MacsBreakdown { layers, total, parameter_total })
}

/// Total weights including biases and norm affine parameters. Independent of
/// the input resolution.
pub fn params_of(arch: &ConcreteArch, base: &BaseConfig) -> Result<u64> {
    Ok(layer_costs(arch, base)?.iter().map(|c| c.params).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost_model::{resolve_arch, ArchFactors, StageSpec};
    use alloc::string::ToString;
    use alloc::vec;

    fn conv_only(channels: u32, stride: u32) -> BaseConfig {
        BaseConfig {
            base_resolution: 32,
            input_channels: 3,
            stages: vec![StageSpec {
                name: "stem".to_string(),
                kind: StageKind::StemConv,
                layers: 1,
                channels,
                stride,
                kernel: 3,
                expansion: None,
                attn_dim: None,
                patch: None,
                ffn_multiplier: None,
            }],
        }
    }

    #[test]
    fn single_conv_macs() {
        let base = conv_only(8, 1);
        let arch = resolve_arch(&ArchFactors::IDENTITY, &base).unwrap();
        let b = macs_of(&arch, &base).unwrap();
        assert_eq!(b.total, 32 * 32 * 8 * 9 * 3);
        assert_eq!(b.total, 221_184);
        assert_eq!(b.layers.len(), 1);
        assert_eq!(b.parameter_total, 9 * 3 * 8 + 2 * 8);
    }

    #[test]
    fn linear_head_params_closed_form() {
        let mut base = conv_only(64, 1);
        base.stages.push(StageSpec {
            name: "head".to_string(),
            kind: StageKind::Classifier,
            layers: 1,
            channels: 128,
            stride: 1,
            kernel: 1,
            expansion: None,
            attn_dim: None,
            patch: None,
            ffn_multiplier: None,
        });
        let arch = resolve_arch(&ArchFactors::IDENTITY, &base).unwrap();
        let costs = layer_costs(&arch, &base).unwrap();
        assert_eq!(costs[1].params, 64 * 128 + 128);
        assert_eq!(costs[1].macs, 64 * 128);
    }

    #[test]
    fn stage_mismatch_is_reported() {
        let base = conv_only(8, 1);
        let arch = resolve_arch(&ArchFactors::IDENTITY, &base).unwrap();
        let mut other = base.clone();
        other.stages[0].name = "renamed".to_string();
        assert!(matches!(macs_of(&arch, &other), Err(Error::ConfigMismatch(_))));
    }
}
