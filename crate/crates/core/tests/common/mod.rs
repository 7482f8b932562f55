//! Naive reference implementations and toy fixtures shared by the
//! integration tests. The oracles use plain nested loops over the public
//! parameter structs and never call the optimized code paths.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use eavnet::attention::AttentionConfig;
use eavnet::cnn::{CnnConfig, CnnModel, EmbeddingMode};
use eavnet::corpus::{PaddedDocument, Vocabulary, PAD};
use eavnet::embeddings::EmbeddingTable;
use eavnet::neural::{Activation, ConvFilter, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn act(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Relu => x.max(0.0),
        Activation::Identity => x,
    }
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_filter(rng: &mut impl Rng, length: usize, width: usize) -> ConvFilter {
    let w = random_matrix(rng, length, width);
    ConvFilter::new(w, rng.gen_range(-0.5..0.5)).unwrap()
}

/// Output `i` is `act(sum_k sum_j W[k][j] * s[i + k][j] + b)`.
pub fn naive_conv1d(s: &Matrix, filter: &ConvFilter, a: Activation) -> Vec<f64> {
    let (n, d) = s.shape();
    let l = filter.weights.rows();
    let mut out = Vec::new();
    for i in 0..=n - l {
        let mut z = filter.bias;
        for k in 0..l {
            for j in 0..d {
                z += filter.weights.get(k, j) * s.get(i + k, j);
            }
        }
        out.push(act(a, z));
    }
    out
}

/// `n x m_a` as nested rows.
pub fn naive_attention_matrix(s: &Matrix, filters: &[ConvFilter], a: Activation) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<f64>> = filters.iter().map(|f| naive_conv1d(s, f, a)).collect();
    (0..s.rows()).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

pub fn naive_row_max(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter()
        .map(|r| {
            let mut best = r[0];
            for &x in &r[1..] {
                if x > best {
                    best = x;
                }
            }
            best
        })
        .collect()
}

pub fn naive_eav(s: &Matrix, v_a: &[f64]) -> Vec<f64> {
    let (n, d) = s.shape();
    (0..d).map(|j| (0..n).map(|i| s.get(i, j) * v_a[i]).sum()).collect()
}

/// Raw count times `ln(N / df)` for every token of `doc` that occurs in `corpus`.
pub fn naive_tfidf(doc: &[String], corpus: &[Vec<String>]) -> BTreeMap<String, f64> {
    let n = corpus.len() as f64;
    let mut out = BTreeMap::new();
    for tok in doc {
        *out.entry(tok.clone()).or_insert(0.0) += 1.0;
    }
    out.retain(|t, _| corpus.iter().any(|d| d.contains(t)));
    for (t, v) in out.iter_mut() {
        let df = corpus.iter().filter(|d| d.contains(t)).count() as f64;
        *v *= (n / df).ln();
    }
    out
}

/// Logits by brute force: every window (padding included), max-over-time,
/// every token's max attention response, then the dense softmax layer.
pub fn naive_logits(model: &CnnModel, doc: &PaddedDocument) -> Vec<f64> {
    let p = &model.params;
    let a = model.config.activation;
    let s = model.document_matrix(doc);
    let mut features = Vec::new();
    for group in &p.filters {
        for f in group {
            let conv = naive_conv1d(&s, f, a);
            features.push(conv.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        }
    }
    if let Some(cfg) = &model.config.attention {
        let rows = naive_attention_matrix(&s, &p.attention, cfg.activation);
        let v_a = naive_row_max(&rows);
        features.extend(naive_eav(&s, &v_a));
    }
    let c = p.softmax_bias.len();
    (0..c)
        .map(|k| p.softmax_bias[k] + features.iter().enumerate().map(|(f, h)| h * p.softmax_weights.get(f, k)).sum::<f64>())
        .collect()
}

pub fn toy_vocab(v: usize) -> Vocabulary {
    let mut tokens = vec!["<pad>".to_string(), "<unk>".to_string()];
    tokens.extend((2..v).map(|i| format!("w{i}")));
    Vocabulary::from_parts(tokens, vec![1; v]).unwrap()
}

pub fn toy_table(v: usize, d: usize, seed: u64) -> EmbeddingTable {
    let mut r = rng(seed);
    let mut input: Vec<f32> = (0..v * d).map(|_| r.gen_range(-1.0..1.0)).collect();
    input[..d].fill(0.0);
    EmbeddingTable::new(toy_vocab(v), d, input, vec![0.0; v * d]).unwrap()
}

/// The n=12, d=8, m=2, lengths {2,3}, m_a=3, three-class model without dropout.
pub fn toy_config(attention: bool, seed: u64) -> CnnConfig {
    CnnConfig {
        filter_lengths: vec![2, 3],
        filters_per_length: 2,
        n: 12,
        num_classes: 3,
        dropout_rate: 0.0,
        attention: attention.then(|| AttentionConfig {
            num_filters: 3,
            ..Default::default()
        }),
        seed,
        ..Default::default()
    }
}

pub fn toy_model(attention: bool, fine_tune: bool, v: usize, seed: u64) -> CnnModel {
    let cfg = CnnConfig {
        embedding_mode: if fine_tune { EmbeddingMode::FineTune } else { EmbeddingMode::Static },
        ..toy_config(attention, seed)
    };
    CnnModel::new(cfg, &toy_table(v, 8, seed)).unwrap()
}

pub fn random_doc(rng: &mut impl Rng, n: usize, v: usize) -> PaddedDocument {
    let length = rng.gen_range(1..=n);
    let indices = (0..n).map(|i| if i < length { rng.gen_range(1..v) } else { PAD }).collect();
    PaddedDocument { indices, length }
}

pub fn random_words(rng: &mut impl Rng, len: usize, alphabet: usize) -> Vec<String> {
    (0..len).map(|_| format!("t{}", rng.gen_range(0..alphabet))).collect()
}

pub fn distinct(tokens: &[String]) -> HashSet<&str> {
    tokens.iter().map(String::as_str).collect()
}
