//! Embedding attention vectors: length-1 convolutions, row-wise max pooling,
//! and the attention-weighted embedding sum appended to the CNN features.

mod explain;

use serde::{Deserialize, Serialize};

use crate::neural::{conv1d, rowwise_max, Activation, ConvFilter, Matrix};
use crate::{Error, Result};

pub use explain::{explain, nam_forward, normalize_weights, write_explanation, AttentionExplanation, ExplanationExport, TokenWeight};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttentionConfig {
    /// m_a, the number of length-1 attention filters.
    pub num_filters: usize,
    pub activation: Activation,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig {
            num_filters: 10,
            activation: Activation::Relu,
        }
    }
}

/// `n x m_a` matrix whose column `j` is `conv1d(s, filters[j])`.
pub fn attention_matrix(s: &Matrix, filters: &[ConvFilter], activation: Activation) -> Result<Matrix> {
    if let Some(f) = filters.iter().find(|f| f.length() != 1) {
        return Err(Error::InvalidArgument(format!(
            "attention filters must have length 1, found length {}",
            f.length()
        )));
    }
    let mut out = Matrix::zeros(s.rows(), filters.len());
    for (j, f) in filters.iter().enumerate() {
        for (i, v) in conv1d(s, f, activation)?.into_iter().enumerate() {
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Row-wise maximum of the attention matrix with the winning columns.
pub fn attention_vector(s_a: &Matrix) -> Result<(Vec<f64>, Vec<usize>)> {
    rowwise_max(s_a)
}

/// `v_e = sᵀ v_a`.
pub fn embedding_attention_vector(s: &Matrix, v_a: &[f64]) -> Result<Vec<f64>> {
    s.transpose_matvec(v_a)
}
