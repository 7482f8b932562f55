//! Single-layer multi-width CNN document classifier with an optional
//! embedding-attention pathway.

mod checkpoint;
mod model;
mod train;

use serde::{Deserialize, Serialize};

use crate::attention::AttentionConfig;
use crate::neural::Activation;
use crate::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint, CnnCheckpoint, CHECKPOINT_VERSION};
pub use model::{AttentionTrace, CnnModel, CnnParams, ForwardPass};
pub use train::{
    best_epoch, evaluate, evaluate_padded, fit_cnn, pad_labeled, train_cnn, write_metrics, EpochMetrics, Evaluation,
    TrainOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingMode {
    #[default]
    Static,
    FineTune,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub filter_lengths: Vec<usize>,
    pub filters_per_length: usize,
    pub dropout_rate: f64,
    /// Padded document length.
    pub n: usize,
    pub num_classes: usize,
    pub epochs: usize,
    /// Stop after this many consecutive epochs without a new best dev accuracy.
    pub patience: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub seed: u64,
    pub embedding_mode: EmbeddingMode,
    pub activation: Activation,
    /// Scale each example's loss by the inverse frequency of its class.
    pub class_weights: bool,
    /// `Some` turns the model into the attention variant.
    pub attention: Option<AttentionConfig>,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            filter_lengths: vec![2, 3, 4, 5],
            filters_per_length: 64,
            dropout_rate: 0.2,
            n: 800,
            num_classes: crate::corpus::NUM_CLASSES,
            epochs: 20,
            patience: 5,
            lr: 0.05,
            batch_size: 16,
            clip_norm: 5.0,
            seed: 0,
            embedding_mode: EmbeddingMode::Static,
            activation: Activation::Relu,
            class_weights: false,
            attention: None,
        }
    }
}

impl CnnConfig {
    pub fn nam(num_attention_filters: usize) -> Self {
        CnnConfig {
            attention: Some(AttentionConfig {
                num_filters: num_attention_filters,
                ..Default::default()
            }),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.filter_lengths.is_empty() || self.filters_per_length < 1 {
            return bad("need at least one filter length and m >= 1".into());
        }
        if let Some(&l) = self.filter_lengths.iter().find(|&&l| l < 1 || l > self.n) {
            return bad(format!("filter length {l} must lie in 1..={}", self.n));
        }
        let mut sorted = self.filter_lengths.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.filter_lengths.len() {
            return bad("filter lengths must be distinct".into());
        }
        if self.num_classes < 2 {
            return bad("num_classes must be >= 2".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} not in [0, 1)", self.dropout_rate));
        }
        if self.batch_size < 1 || !(self.lr >= 0.0) || !(self.clip_norm > 0.0) {
            return bad("batch_size >= 1, lr >= 0 and clip_norm > 0 are required".into());
        }
        if let Some(a) = &self.attention {
            if a.num_filters < 1 {
                return bad("attention needs at least one filter".into());
            }
        }
        Ok(())
    }

    /// Width of the pooled CNN feature vector, without the attention pathway.
    pub fn num_conv_features(&self) -> usize {
        self.filter_lengths.len() * self.filters_per_length
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(CnnConfig::default().validate().is_ok());
        assert!(CnnConfig { n: 4, ..Default::default() }.validate().is_err());
        assert!(CnnConfig { filters_per_length: 0, ..Default::default() }.validate().is_err());
        assert!(CnnConfig { filter_lengths: vec![2, 2], ..Default::default() }.validate().is_err());
        assert!(CnnConfig::nam(0).validate().is_err());
        assert_eq!(CnnConfig::default().num_conv_features(), 256);
    }
}
