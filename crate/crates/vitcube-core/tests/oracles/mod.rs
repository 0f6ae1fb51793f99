//! Independent reference implementations shared by the test suites.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::Rng;
use rand_distr::StandardNormal;
use vitcube_core::attention::SeparableAttentionWeights;
use vitcube_core::cost_model::{layer_costs, BaseConfig, ConcreteArch, StageKind};
use vitcube_core::gp::{KernelParams, Smoothness};
use vitcube_core::linalg::Matrix;
use vitcube_core::pareto::ModelRecord;

// ---- gaussian process ------------------------------------------------------

pub fn oracle_kernel(a: &[f64], b: &[f64], ls: &[f64], s2: f64, nu: Smoothness) -> f64 {
    let r = a.iter().zip(b).zip(ls).map(|((x, y), l)| ((x - y) / l).powi(2)).sum::<f64>().sqrt();
    match nu {
        Smoothness::Half => s2 * (-r).exp(),
        Smoothness::ThreeHalves => s2 * (1.0 + 3f64.sqrt() * r) * (-(3f64.sqrt()) * r).exp(),
        Smoothness::FiveHalves => s2 * (1.0 + 5f64.sqrt() * r + 5.0 * r * r / 3.0) * (-(5f64.sqrt()) * r).exp(),
    }
}

/// Gauss-Jordan inverse with partial pivoting; also returns log|det|.
pub fn inverse_and_logdet(a: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut logdet = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        inv.swap(c, p);
        let piv = m[c][c];
        logdet += piv.abs().ln();
        for j in 0..n {
            m[c][j] /= piv;
            inv[c][j] /= piv;
        }
        for i in 0..n {
            if i != c {
                let f = m[i][c];
                for j in 0..n {
                    m[i][j] -= f * m[c][j];
                    inv[i][j] -= f * inv[c][j];
                }
            }
        }
    }
    (inv, logdet)
}

pub struct Dense {
    xs: Vec<Vec<f64>>,
    inv: Vec<Vec<f64>>,
    logdet: f64,
    ls: Vec<f64>,
    s2: f64,
    noise: f64,
    nu: Smoothness,
}

impl Dense {
    pub fn new(xs: &[Vec<f64>], k: &KernelParams, noise: f64) -> Self {
        let n = xs.len();
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        oracle_kernel(&xs[i], &xs[j], &k.lengthscales, k.signal_variance, k.smoothness)
                            + if i == j { noise } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        let (inv, logdet) = inverse_and_logdet(&a);
        Self {
            xs: xs.to_vec(),
            inv,
            logdet,
            ls: k.lengthscales.clone(),
            s2: k.signal_variance,
            noise,
            nu: k.smoothness,
        }
    }

    pub fn quad(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = u.len();
        (0..n).map(|i| (0..n).map(|j| u[i] * self.inv[i][j] * v[j]).sum::<f64>()).sum()
    }

    pub fn lml(&self, y: &[f64]) -> f64 {
        let n = y.len() as f64;
        -0.5 * self.quad(y, y) - 0.5 * self.logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn predict(&self, y: &[f64], offset: f64, q: &[f64]) -> (f64, f64) {
        let yc: Vec<f64> = y.iter().map(|v| v - offset).collect();
        let k: Vec<f64> = self.xs.iter().map(|x| oracle_kernel(x, q, &self.ls, self.s2, self.nu)).collect();
        let mean = self.quad(&k, &yc) + offset;
        let var = self.s2 + self.noise - self.quad(&k, &k);
        (mean, var)
    }
}

/// Joint draw of f(xs) + noise from the zero-mean prior.
pub fn prior_draw(rng: &mut StdRng, xs: &[Vec<f64>], k: &KernelParams, noise: f64) -> Vec<f64> {
    let n = xs.len();
    // plain cholesky of the prior covariance, in test code
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = oracle_kernel(&xs[i], &xs[j], &k.lengthscales, k.signal_variance, k.smoothness);
            if i == j {
                s += noise + 1e-10;
            }
            for t in 0..j {
                s -= l[i][t] * l[j][t];
            }
            l[i][j] = if i == j { s.sqrt() } else { s / l[j][j] };
        }
    }
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (0..n).map(|i| (0..=i).map(|j| l[i][j] * z[j]).sum()).collect()
}

// ---- separable attention ---------------------------------------------------

pub fn random_matrix(rng: &mut StdRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.5..1.5))
}

pub fn random_weights(rng: &mut StdRng, d: usize) -> SeparableAttentionWeights {
    SeparableAttentionWeights {
        input: random_matrix(rng, d, 1),
        key: random_matrix(rng, d, d),
        value: random_matrix(rng, d, d),
        output: random_matrix(rng, d, d),
    }
}

/// Element-by-element transcription of separable attention.
pub fn separable_scalar(x: &[Vec<f64>], w: &SeparableAttentionWeights) -> (Vec<Vec<f64>>, Vec<f64>) {
    let l = x.len();
    let d = x[0].len();
    let mut logit = vec![0.0; l];
    for i in 0..l {
        for k in 0..d {
            logit[i] += x[i][k] * w.input[(k, 0)];
        }
    }
    let mut max = f64::NEG_INFINITY;
    for &v in &logit {
        if v > max {
            max = v;
        }
    }
    let mut denom = 0.0;
    for &v in &logit {
        denom += (v - max).exp();
    }
    let mut cs = vec![0.0; l];
    for i in 0..l {
        cs[i] = (logit[i] - max).exp() / denom;
    }
    let mut cv = vec![0.0; d];
    for i in 0..l {
        for j in 0..d {
            let mut xk = 0.0;
            for k in 0..d {
                xk += x[i][k] * w.key[(k, j)];
            }
            cv[j] += cs[i] * xk;
        }
    }
    let mut out = vec![vec![0.0; d]; l];
    for i in 0..l {
        let mut mixed = vec![0.0; d];
        for j in 0..d {
            let mut xv = 0.0;
            for k in 0..d {
                xv += x[i][k] * w.value[(k, j)];
            }
            mixed[j] = cv[j] * if xv > 0.0 { xv } else { 0.0 };
        }
        for j in 0..d {
            for k in 0..d {
                out[i][j] += mixed[k] * w.output[(k, j)];
            }
        }
    }
    (out, cs)
}

pub fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

// ---- pareto ----------------------------------------------------------------

/// Repeatedly peels off the records that nothing remaining dominates.
pub fn peel_oracle(records: &[ModelRecord]) -> Vec<usize> {
    let n = records.len();
    let mut rank = vec![usize::MAX; n];
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut k = 0;
    while !remaining.is_empty() {
        let front: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| {
                !remaining.iter().any(|&j| {
                    let (a, b) = (&records[j], &records[i]);
                    a.macs <= b.macs && a.accuracy >= b.accuracy && (a.macs < b.macs || a.accuracy > b.accuracy)
                })
            })
            .collect();
        for &i in &front {
            rank[i] = k;
        }
        remaining.retain(|i| !front.contains(i));
        k += 1;
    }
    rank
}

// ---- loop-nest cost counting -----------------------------------------------

/// Counts multiply-accumulates of a same-padded convolution by walking the
/// full loop nest over output positions.
pub fn conv_loops(in_size: u32, stride: u32, k: u32, cin: u32, cout: u32, groups: u32) -> (u64, u32) {
    let out = in_size.div_ceil(stride);
    let mut count = 0u64;
    for _oy in 0..out {
        for _ox in 0..out {
            for co in 0..cout {
                let g = co / (cout / groups);
                let per_group = cin / groups;
                for _ky in 0..k {
                    for _kx in 0..k {
                        for ci in g * per_group..(g + 1) * per_group {
                            let _ = ci;
                            count += 1;
                        }
                    }
                }
            }
        }
    }
    (count, out)
}

pub fn linear_loops(tokens: u64, cin: u32, cout: u32) -> u64 {
    let mut count = 0;
    for _t in 0..tokens {
        for _o in 0..cout {
            for _i in 0..cin {
                count += 1;
            }
        }
    }
    count
}

/// Multiply counter over a scalar transcription of separable attention.
pub fn separable_attention_loops(tokens: u64, d: u32) -> u64 {
    let mut count = 0;
    for _t in 0..tokens {
        for _i in 0..d {
            count += 1; // logit
        }
        for _o in 0..d {
            for _i in 0..d {
                count += 2; // key and value projections
            }
        }
        for _o in 0..d {
            count += 2; // context accumulation, broadcast product
        }
        for _o in 0..d {
            for _i in 0..d {
                count += 1; // output projection
            }
        }
    }
    count
}

pub fn ir_loops(size: u32, stride: u32, cin: u32, hidden: u32, cout: u32) -> (u64, u32) {
    let mut total = 0;
    if hidden != cin {
        total += conv_loops(size, 1, 1, cin, hidden, 1).0;
    }
    let (dw, out) = conv_loops(size, stride, 3, hidden, hidden, hidden);
    total += dw;
    total += conv_loops(out, 1, 1, hidden, cout, 1).0;
    (total, out)
}

/// Loop-count MACs of the shipped MobileViT V2 stage table at an input
/// side of `res`, per stage kind: stem, inverted-residual stages, mobilevit
/// stages (including their strided opening block) and classifier.
pub fn baseline_table_loops(res: u32) -> [u64; 4] {
    let (stem, s) = conv_loops(res, 2, 3, 3, 32, 1);
    let (a, s) = ir_loops(s, 1, 32, 64, 64);
    let (b, s) = ir_loops(s, 2, 64, 128, 128);
    let (c, mut s) = ir_loops(s, 1, 128, 256, 128);
    let mut mvit = 0;
    let mut cin = 128;
    for (c, d, blocks) in [(256u32, 128u32, 2), (384, 192, 4), (512, 256, 3)] {
        let (b, inner) = ir_loops(s, 2, cin, 2 * cin, c);
        let p = inner.div_ceil(2) * 2;
        let tokens = (p * p) as u64;
        mvit += b;
        mvit += conv_loops(p, 1, 3, c, c, c).0 + linear_loops(tokens, c, d);
        for _ in 0..blocks {
            mvit += separable_attention_loops(tokens, d);
            mvit += 2 * linear_loops(tokens, d, 2 * d);
        }
        mvit += linear_loops(tokens, d, c);
        s = p;
        cin = c;
    }
    [stem, a + b + c, mvit, linear_loops(1, 512, 100)]
}

/// Library MACs summed in the same four groups as [`baseline_table_loops`].
pub fn macs_by_kind(arch: &ConcreteArch, base: &BaseConfig) -> [u64; 4] {
    let mut out = [0; 4];
    for cost in layer_costs(arch, base).unwrap() {
        let stage = cost.label.split('.').next().unwrap();
        let kind = base.stages.iter().find(|s| s.name == stage).unwrap().kind;
        let slot = match kind {
            StageKind::StemConv => 0,
            StageKind::InvertedResidual => 1,
            StageKind::MobilevitBlock => 2,
            StageKind::Classifier => 3,
        };
        out[slot] += cost.macs;
    }
    out
}
