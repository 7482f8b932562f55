//! word2vec with negative sampling (skip-gram and CBOW), embedding files, and
//! cosine nearest-neighbour queries.

mod io;
mod sgns;
mod train;

use serde::{Deserialize, Serialize};

use crate::corpus::{Vocabulary, UNK};
use crate::{Error, Result};

pub use io::{read_binary, read_text, write_binary, write_text};
pub use sgns::{log_sigmoid, sgns_gradient, SgnsGradient};
pub use train::{train_embeddings, TrainedEmbeddings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum W2vMode {
    Cbow,
    Skip,
}

impl W2vMode {
    pub fn default_learning_rate(self) -> f64 {
        match self {
            W2vMode::Skip => 0.025,
            W2vMode::Cbow => 0.05,
        }
    }
}

impl std::fmt::Display for W2vMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            W2vMode::Cbow => "CBOW",
            W2vMode::Skip => "SKIP",
        })
    }
}

impl std::str::FromStr for W2vMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CBOW" => Ok(W2vMode::Cbow),
            "SKIP" | "SKIPGRAM" | "SKIP-GRAM" => Ok(W2vMode::Skip),
            _ => Err(Error::InvalidArgument(format!("unknown word2vec mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct W2vConfig {
    pub mode: W2vMode,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// `None` selects the mode's default (0.025 skip-gram, 0.05 CBOW).
    pub initial_lr: Option<f64>,
    pub subsample_threshold: f64,
    pub min_count: u64,
    pub seed: u64,
}

impl Default for W2vConfig {
    fn default() -> Self {
        W2vConfig {
            mode: W2vMode::Skip,
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: None,
            subsample_threshold: 1e-4,
            min_count: 5,
            seed: 1,
        }
    }
}

impl W2vConfig {
    pub fn learning_rate(&self) -> f64 {
        self.initial_lr.unwrap_or_else(|| self.mode.default_learning_rate())
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 1 || self.negatives < 1 || self.dim < 1 {
            return Err(Error::InvalidArgument(
                "word2vec window, negatives and dim must all be >= 1".into(),
            ));
        }
        if self.min_count < 1 {
            return Err(Error::InvalidArgument("min_count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Learned word vectors bound to the vocabulary they index.
///
/// `input` holds the word vectors proper; `output` holds the
/// negative-sampling context parameters. Both are row-major `V x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    dim: usize,
    input: Vec<f32>,
    output: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(vocab: Vocabulary, dim: usize, input: Vec<f32>, output: Vec<f32>) -> Result<Self> {
        let want = vocab.len() * dim;
        if input.len() != want || output.len() != want {
            return Err(Error::Shape(format!(
                "embedding matrices must be {}x{dim}; got {} and {} values",
                vocab.len(),
                input.len(),
                output.len()
            )));
        }
        if input.iter().chain(&output).any(|x| !x.is_finite()) {
            return Err(Error::Data("embedding entries must be finite".into()));
        }
        Ok(EmbeddingTable {
            vocab,
            dim,
            input,
            output,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn input_row(&self, index: usize) -> &[f32] {
        &self.input[index * self.dim..(index + 1) * self.dim]
    }

    pub fn output_row(&self, index: usize) -> &[f32] {
        &self.output[index * self.dim..(index + 1) * self.dim]
    }

    pub fn input_vectors(&self) -> &[f32] {
        &self.input
    }

    pub fn output_vectors(&self) -> &[f32] {
        &self.output
    }

    pub fn vocab_hash(&self) -> String {
        self.vocab.hash()
    }

    /// SHA-256 over the vocabulary hash, dimension and input vectors.
    pub fn content_hash(&self) -> String {
        let mut bytes = self.vocab_hash().into_bytes();
        bytes.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for x in &self.input {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        crate::util::sha256_hex(&bytes)
    }

    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        self.vocab.get(token).map(|i| self.input_row(i))
    }

    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        cosine(self.input_row(a), self.input_row(b))
    }

    /// The `top_k` tokens closest to `token` by cosine over input vectors,
    /// excluding the query, the reserved rows and zero vectors.
    pub fn nearest_neighbors(&self, token: &str, top_k: usize) -> Result<Vec<(String, f64)>> {
        let q = self
            .vocab
            .get(token)
            .filter(|&i| i > UNK)
            .ok_or_else(|| Error::Data(format!("token {token:?} is not in the embedding vocabulary")))?;
        let mut scored: Vec<(usize, f64)> = (UNK + 1..self.len())
            .filter(|&i| i != q && norm(self.input_row(i)) > 0.0)
            .map(|i| (i, self.cosine(q, i)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(scored
            .into_iter()
            .take(top_k)
            .map(|(i, c)| (self.vocab.tokens()[i].clone(), c))
            .collect())
    }
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

pub(crate) fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let d: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    d / (na * nb)
}
