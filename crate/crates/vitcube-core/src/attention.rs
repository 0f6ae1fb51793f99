//! Reference separable self-attention, a multi-head attention baseline and
//! analytical multiply-accumulate counts for both.
//!
//! Separable attention scores every token once against a learned latent
//! direction instead of against every other token:
//!
//! ```text
//! c_s = softmax(x W_I)              (over tokens)
//! c_v = sum_i c_s(i) * (x W_Q)(i)   (one context vector for the sequence)
//! z   = (c_v * ReLU(x W_V)) W_L     (broadcast elementwise product)
//! ```
//!
//! so its cost grows linearly in the token count `l`. No biases, no
//! positional terms.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

/// `l x d` matrix of token embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix(Matrix);

impl TokenMatrix {
    pub fn new(data: Matrix) -> Result<Self> {
        if data.rows() == 0 || data.cols() == 0 {
            return Err(Error::Shape(format!("empty token matrix {}x{}", data.rows(), data.cols())));
        }
        if !data.is_finite() {
            return Err(Error::Numeric("token matrix contains non-finite values".into()));
        }
        Ok(Self(data))
    }

    pub fn tokens(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

/// Projection weights of one separable attention unit for embedding dim `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableAttentionWeights {
    /// `d x 1`, produces one context logit per token.
    pub input: Matrix,
    /// `d x d`, key branch.
    pub key: Matrix,
    /// `d x d`, value branch.
    pub value: Matrix,
    /// `d x d`, output projection.
    pub output: Matrix,
}

impl SeparableAttentionWeights {
    pub fn dim(&self) -> usize {
        self.key.rows()
    }

    fn validate(&self, d: usize) -> Result<()> {
        let shapes = [
            ("input", &self.input, d, 1),
            ("key", &self.key, d, d),
            ("value", &self.value, d, d),
            ("output", &self.output, d, d),
        ];
        for (name, m, rows, cols) in shapes {
            if (m.rows(), m.cols()) != (rows, cols) {
                return Err(Error::Shape(format!(
                    "{name} weights are {}x{}, expected {rows}x{cols}",
                    m.rows(),
                    m.cols()
                )));
            }
            if !m.is_finite() {
                return Err(Error::Input(format!("{name} weights contain non-finite values")));
            }
        }
        Ok(())
    }
}

/// Intermediate tensors of [`separable_attention`], exposed for testing.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionIntermediates {
    /// Context scores, length `l`, on the probability simplex.
    pub scores: Vec<f64>,
    /// Context vector, length `d`.
    pub context: Vec<f64>,
    /// Projected keys `x W_Q`, `l x d`.
    pub keys: Matrix,
    /// Activated values `ReLU(x W_V)`, `l x d`.
    pub values: Matrix,
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&v| libm::exp(v - max)).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

/// Weighted sum of key rows: `sum_i scores[i] * keys.row(i)`.
pub fn context_vector(keys: &Matrix, scores: &[f64]) -> Result<Vec<f64>> {
    if scores.len() != keys.rows() {
        return Err(Error::Shape(format!("{} context scores for {} tokens", scores.len(), keys.rows())));
    }
    let mut out = alloc::vec![0.0; keys.cols()];
    for (i, &s) in scores.iter().enumerate() {
        for (o, &k) in out.iter_mut().zip(keys.row(i)) {
            *o += s * k;
        }
    }
    Ok(out)
}

pub fn separable_attention(
    x: &TokenMatrix,
    weights: &SeparableAttentionWeights,
) -> Result<(TokenMatrix, AttentionIntermediates)> {
    let d = x.dim();
    weights.validate(d)?;
    let x = x.matrix();

    let logits = x.matmul(&weights.input)?;
    let scores = softmax(logits.as_slice());
    let keys = x.matmul(&weights.key)?;
    let context = context_vector(&keys, &scores)?;

    let mut values = x.matmul(&weights.value)?;
    for i in 0..values.rows() {
        for v in values.row_mut(i) {
            *v = v.max(0.0);
        }
    }
    let mut mixed = values.clone();
    for i in 0..mixed.rows() {
        for (v, &c) in mixed.row_mut(i).iter_mut().zip(&context) {
            *v *= c;
        }
    }
    let out = mixed.matmul(&weights.output)?;
    if !out.is_finite() {
        return Err(Error::Numeric("separable attention produced non-finite output".into()));
    }
    Ok((TokenMatrix(out), AttentionIntermediates { scores, context, keys, values }))
}

/// Projections of a standard multi-head attention layer, all `d x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct MhaWeights {
    pub query: Matrix,
    pub key: Matrix,
    pub value: Matrix,
    pub output: Matrix,
}

/// Scaled dot-product multi-head attention, the `O(l^2)` baseline.
pub fn mha_reference(x: &TokenMatrix, weights: &MhaWeights, heads: usize) -> Result<TokenMatrix> {
    let d = x.dim();
    if heads == 0 || d % heads != 0 {
        return Err(Error::InvalidConfig(format!("embedding dim {d} not divisible into {heads} heads")));
    }
    for (name, m) in
        [("query", &weights.query), ("key", &weights.key), ("value", &weights.value), ("output", &weights.output)]
    {
        if (m.rows(), m.cols()) != (d, d) {
            return Err(Error::Shape(format!("{name} weights are {}x{}, expected {d}x{d}", m.rows(), m.cols())));
        }
    }
    let x = x.matrix();
    let l = x.rows();
    let q = x.matmul(&weights.query)?;
    let k = x.matmul(&weights.key)?;
    let v = x.matmul(&weights.value)?;
    let head_dim = d / heads;
    let scale = 1.0 / libm::sqrt(head_dim as f64);

    let mut concat = Matrix::zeros(l, d);
    let mut logits = alloc::vec![0.0; l];
    for h in 0..heads {
        let cols = h * head_dim..(h + 1) * head_dim;
        for i in 0..l {
            let qi = &q.row(i)[cols.clone()];
            for (j, logit) in logits.iter_mut().enumerate() {
                let kj = &k.row(j)[cols.clone()];
                *logit = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
            }
            let probs = softmax(&logits);
            let out = &mut concat.row_mut(i)[cols.clone()];
            for (j, &p) in probs.iter().enumerate() {
                for (o, &vj) in out.iter_mut().zip(&v.row(j)[cols.clone()]) {
                    *o += p * vj;
                }
            }
        }
    }
    TokenMatrix::new(concat.matmul(&weights.output)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    Separable,
    Mha,
}

impl AttentionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttentionKind::Separable => "separable",
            AttentionKind::Mha => "mha",
        }
    }
}

/// Multiply-accumulates of one attention unit over `tokens` tokens of
/// dimension `dim`.
///
/// Separable: `l d` (scores) + `l d^2` (keys) + `l d` (context sum) + `l d^2`
/// (values) + `l d` (broadcast product) + `l d^2` (output) = `3 l d^2 + 3 l d`.
/// Multi-head: four `l d^2` projections plus `l^2 d` each for the score and
/// mixing products; the head count cancels.
pub fn attention_macs(tokens: u64, dim: u64, kind: AttentionKind) -> u64 {
    match kind {
        AttentionKind::Separable => 3 * tokens * dim * dim + 3 * tokens * dim,
        AttentionKind::Mha => 4 * tokens * dim * dim + 2 * tokens * tokens * dim,
    }
}
