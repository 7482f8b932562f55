use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cnn::CnnModel;
use crate::corpus::{pad_document, PaddedDocument, TaskId, PAD};
use crate::neural::Mode;
use crate::util::{rng_for, write_json_pretty};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionExplanation {
    pub v_a: Vec<f64>,
    pub v_e: Vec<f64>,
    /// One surface form per position; PAD positions hold `<pad>`.
    pub token_surface: Vec<String>,
    pub is_pad: Vec<bool>,
    /// Min-max normalized `v_a` over non-PAD positions; PAD positions are 0.
    pub normalized_weights: Vec<f64>,
    pub predicted_label: usize,
    pub logits: Vec<f64>,
}

impl AttentionExplanation {
    /// Non-PAD position with the largest normalized weight (first on ties).
    pub fn top_position(&self) -> Option<usize> {
        (0..self.v_a.len())
            .filter(|&i| !self.is_pad[i])
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if self.normalized_weights[b] >= self.normalized_weights[i] => Some(b),
                _ => Some(i),
            })
    }
}

/// Min-max over the unmasked positions. A constant vector maps to 0.5;
/// masked positions map to 0.
pub fn normalize_weights(v_a: &[f64], is_pad: &[bool]) -> Vec<f64> {
    let live = || v_a.iter().zip(is_pad).filter(|(_, &p)| !p).map(|(&v, _)| v);
    let lo = live().fold(f64::INFINITY, f64::min);
    let hi = live().fold(f64::NEG_INFINITY, f64::max);
    v_a.iter()
        .zip(is_pad)
        .map(|(&v, &pad)| {
            if pad {
                0.0
            } else if hi > lo {
                (v - lo) / (hi - lo)
            } else {
                0.5
            }
        })
        .collect()
}

/// Forward pass through both pathways, returning logits and the attention
/// explanation. Surface forms are taken from the model vocabulary.
pub fn nam_forward(
    model: &CnnModel,
    doc: &PaddedDocument,
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, AttentionExplanation)> {
    if !model.has_attention() {
        return Err(Error::InvalidArgument("model has no attention pathway".into()));
    }
    let pass = model.forward(doc, mode, rng)?;
    let trace = pass.attention.as_ref().expect("attention model records a trace");
    let is_pad: Vec<bool> = doc.indices.iter().map(|&i| i == PAD).collect();
    let surface = doc
        .indices
        .iter()
        .map(|&i| model.vocab.token(i).unwrap_or_default().to_string())
        .collect();
    let explanation = AttentionExplanation {
        normalized_weights: normalize_weights(&trace.v_a, &is_pad),
        v_a: trace.v_a.clone(),
        v_e: trace.v_e.clone(),
        token_surface: surface,
        is_pad,
        predicted_label: pass.predicted(),
        logits: pass.logits.clone(),
    };
    Ok((pass.logits, explanation))
}

/// Eval-mode explanation of raw `tokens`; out-of-vocabulary tokens keep
/// their original surface form.
pub fn explain(model: &CnnModel, tokens: &[String]) -> Result<AttentionExplanation> {
    let doc = pad_document(tokens, &model.vocab, model.config.n)?;
    let (_, mut e) = nam_forward(model, &doc, Mode::Eval, &mut rng_for(0, 0))?;
    for (slot, tok) in e.token_surface.iter_mut().zip(tokens) {
        slot.clone_from(tok);
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenWeight {
    pub token: String,
    pub weight_raw: f64,
    pub weight_normalized: f64,
}

/// Explanation file layout; PAD positions are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationExport {
    pub doc_id: String,
    pub task: Option<TaskId>,
    pub predicted_label: usize,
    pub tokens: Vec<TokenWeight>,
}

impl ExplanationExport {
    pub fn new(doc_id: &str, task: Option<TaskId>, e: &AttentionExplanation) -> Self {
        ExplanationExport {
            doc_id: doc_id.to_string(),
            task,
            predicted_label: e.predicted_label,
            tokens: (0..e.v_a.len())
                .filter(|&i| !e.is_pad[i])
                .map(|i| TokenWeight {
                    token: e.token_surface[i].clone(),
                    weight_raw: e.v_a[i],
                    weight_normalized: e.normalized_weights[i],
                })
                .collect(),
        }
    }
}

pub fn write_explanation(path: impl AsRef<Path>, export: &ExplanationExport) -> Result<()> {
    write_json_pretty(path.as_ref(), export)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::CnnConfig;
    use crate::corpus::Vocabulary;
    use crate::embeddings::EmbeddingTable;
    use crate::neural::{ConvFilter, Matrix};

    fn model(attention: bool) -> CnnModel {
        let tokens: Vec<String> = ["<pad>", "<unk>", "no", "acute", "bleed", "seen"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let vocab = Vocabulary::from_parts(tokens, vec![0; 6]).unwrap();
        let mut rng = rng_for(0, 0);
        let mut input: Vec<f32> = (0..6 * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        input[..4].fill(0.0);
        let table = EmbeddingTable::new(vocab, 4, input, vec![0.0; 24]).unwrap();
        let base = CnnConfig {
            filter_lengths: vec![1, 2],
            filters_per_length: 2,
            n: 8,
            ..Default::default()
        };
        let cfg = if attention { CnnConfig { attention: Some(Default::default()), ..base } } else { base };
        CnnModel::new(cfg, &table).unwrap()
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn normalization_rules() {
        let w = normalize_weights(&[1.0, 3.0, 2.0, 9.0], &[false, false, false, true]);
        assert_eq!(w, vec![0.0, 1.0, 0.5, 0.0]);
        assert_eq!(normalize_weights(&[2.0, 2.0, 0.0], &[false, false, true]), vec![0.5, 0.5, 0.0]);
        assert_eq!(normalize_weights(&[1.0, 1.0], &[true, true]), vec![0.0, 0.0]);
    }

    #[test]
    fn plain_cnn_has_no_attention() {
        let err = explain(&model(false), &toks("acute bleed")).unwrap_err();
        assert!(err.to_string().contains("model has no attention pathway"));
    }

    #[test]
    fn explanation_invariants() {
        let m = model(true);
        let e = explain(&m, &toks("no acute bleed zebra seen")).unwrap();
        assert_eq!(e.token_surface[3], "zebra");
        assert_eq!(e.normalized_weights.len(), 8);
        assert!(e.normalized_weights.iter().all(|w| (0.0..=1.0).contains(w)));
        assert!(e.normalized_weights[5..].iter().all(|&w| w == 0.0));
        let top = e.top_position().unwrap();
        let raw_top = (0..5).fold(0, |b, i| if e.v_a[i] > e.v_a[b] { i } else { b });
        assert_eq!(top, raw_top);
        let export = ExplanationExport::new("d1", TaskId::new(2).ok(), &e);
        assert_eq!(export.tokens.len(), 5);
    }

    #[test]
    fn all_pad_document() {
        let m = model(true);
        let doc = PaddedDocument { indices: vec![PAD; 8], length: 0 };
        let (_, e) = nam_forward(&m, &doc, Mode::Eval, &mut rng_for(0, 0)).unwrap();
        assert!(e.normalized_weights.iter().all(|&w| w == 0.0));
        assert!(e.top_position().is_none());
    }

    #[test]
    fn zero_attention_filters_give_zero_eav() {
        let mut m = model(true);
        for f in m.params.attention.iter_mut() {
            *f = ConvFilter::new(Matrix::zeros(1, 4), 0.0).unwrap();
        }
        let e = explain(&m, &toks("acute bleed")).unwrap();
        assert!(e.v_a.iter().all(|&v| v == 0.0));
        assert!(e.v_e.iter().all(|&v| v == 0.0));
    }
}
