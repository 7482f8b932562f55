use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{CnnConfig, CnnModel};
use crate::corpus::{pad_document, Document, PaddedDocument, TaskId, Vocabulary};
use crate::embeddings::EmbeddingTable;
use crate::neural::clip_global_norm;
use crate::util::rng_for;
use crate::{Error, Result};

const SHUFFLE_STREAM: u64 = 1_000;
const DROPOUT_STREAM: u64 = 2_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub dev_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot from the epoch with the best dev accuracy.
    pub model: CnnModel,
    pub metrics: Vec<EpochMetrics>,
    /// 1-based; 0 when no epoch ran and the initial model is returned.
    pub best_epoch: usize,
    pub best_dev_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub predictions: Vec<usize>,
}

impl Evaluation {
    pub fn from_predictions(gold: &[usize], predicted: &[usize], num_classes: usize) -> Result<Self> {
        if gold.is_empty() {
            return Err(Error::InvalidArgument("cannot evaluate on an empty document set".into()));
        }
        if gold.len() != predicted.len() {
            return Err(Error::Shape(format!("{} gold labels but {} predictions", gold.len(), predicted.len())));
        }
        let mut confusion = vec![vec![0u64; num_classes]; num_classes];
        let mut hits = 0;
        for (&g, &p) in gold.iter().zip(predicted) {
            if g >= num_classes || p >= num_classes {
                return Err(Error::Data(format!("label out of range for {num_classes} classes")));
            }
            confusion[g][p] += 1;
            hits += usize::from(g == p);
        }
        Ok(Evaluation {
            accuracy: hits as f64 / gold.len() as f64,
            confusion,
            predictions: predicted.to_vec(),
        })
    }
}

/// First epoch (1-based) attaining the maximum dev accuracy.
pub fn best_epoch(dev: &[f64]) -> usize {
    crate::util::argmax(dev) + 1
}

pub fn pad_labeled(docs: &[Document], task: TaskId, vocab: &Vocabulary, n: usize) -> Result<Vec<(PaddedDocument, usize)>> {
    docs.iter()
        .map(|d| Ok((pad_document(&d.tokens, vocab, n)?, d.require_label(task)?)))
        .collect()
}

pub fn evaluate_padded(model: &CnnModel, docs: &[(PaddedDocument, usize)]) -> Result<Evaluation> {
    if docs.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty document set".into()));
    }
    let padded: Vec<PaddedDocument> = docs.iter().map(|(d, _)| d.clone()).collect();
    let predicted: Vec<usize> = model.forward_many(&padded)?.iter().map(|p| p.predicted()).collect();
    let gold: Vec<usize> = docs.iter().map(|(_, y)| *y).collect();
    Evaluation::from_predictions(&gold, &predicted, model.config.num_classes)
}

pub fn evaluate(model: &CnnModel, docs: &[Document], task: TaskId) -> Result<Evaluation> {
    evaluate_padded(model, &pad_labeled(docs, task, &model.vocab, model.config.n)?)
}

/// Builds a model over `table` and trains it on `train`, selecting by `dev`.
pub fn fit_cnn(
    config: CnnConfig,
    table: &EmbeddingTable,
    train: &[Document],
    dev: &[Document],
    task: TaskId,
) -> Result<TrainOutcome> {
    let model = CnnModel::new(config, table)?;
    let n = model.config.n;
    let train = pad_labeled(train, task, &model.vocab, n)?;
    let dev = pad_labeled(dev, task, &model.vocab, n)?;
    train_cnn(model, &train, &dev)
}

fn class_weights(labels: impl Iterator<Item = usize>, num_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; num_classes];
    let mut total = 0;
    for y in labels {
        counts[y] += 1;
        total += 1;
    }
    counts
        .iter()
        .map(|&c| if c == 0 { 1.0 } else { total as f64 / (num_classes * c) as f64 })
        .collect()
}

/// Mini-batch SGD with global-norm clipping. Each epoch's shuffle and dropout
/// masks are pure functions of `(seed, epoch)`.
pub fn train_cnn(
    mut model: CnnModel,
    train: &[(PaddedDocument, usize)],
    dev: &[(PaddedDocument, usize)],
) -> Result<TrainOutcome> {
    if train.is_empty() || dev.is_empty() {
        return Err(Error::InvalidArgument("CNN training needs non-empty train and dev sets".into()));
    }
    let cfg = model.config.clone();
    if let Some((_, y)) = train.iter().chain(dev).find(|(_, y)| *y >= cfg.num_classes) {
        return Err(Error::Data(format!("label {y} out of range for {} classes", cfg.num_classes)));
    }
    let weights = if cfg.class_weights {
        class_weights(train.iter().map(|(_, y)| *y), cfg.num_classes)
    } else {
        vec![1.0; cfg.num_classes]
    };
    let fine = model.fine_tunes_embedding();
    let mut grads = model.params.zeros_like();
    let mut best = (model.clone(), f64::NEG_INFINITY, 0usize);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut stagnant = 0;
    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng_for(cfg.seed, SHUFFLE_STREAM + epoch as u64));
        let mut dropout_rng = model.train_rng(DROPOUT_STREAM + epoch as u64);
        let mut epoch_loss = 0.0;
        let mut hits = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            for s in grads.slices_mut(fine) {
                s.fill(0.0);
            }
            let proj = model.projections(batch.iter().flat_map(|&i| train[i].0.indices.iter().copied()));
            let mut batch_loss = 0.0;
            for &i in batch {
                let (doc, gold) = &train[i];
                let mask = model.draw_mask(crate::neural::Mode::Train, &mut dropout_rng)?;
                let pass = model.forward_with(&proj, doc, mask);
                if pass.logits.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Diverged { epoch, loss: f64::NAN });
                }
                hits += usize::from(pass.predicted() == *gold);
                batch_loss += model.backward(doc, &pass, *gold, weights[*gold], &mut grads)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { epoch, loss: batch_loss });
            }
            epoch_loss += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            let mut gs = grads.slices_mut(fine);
            for g in gs.iter_mut() {
                g.iter_mut().for_each(|x| *x *= scale);
            }
            clip_global_norm(&mut gs, cfg.clip_norm);
            if cfg.lr != 0.0 {
                for (p, g) in model.params.slices_mut(fine).into_iter().zip(gs.iter()) {
                    for (pv, gv) in p.iter_mut().zip(g.iter()) {
                        *pv -= cfg.lr * gv;
                    }
                }
            }
        }
        let train_loss = epoch_loss / train.len() as f64;
        if !train_loss.is_finite() || !model.params.all_finite() {
            return Err(Error::Diverged { epoch, loss: train_loss });
        }
        // Measured on the dropout-perturbed passes of the epoch itself.
        let train_acc = hits as f64 / train.len() as f64;
        let dev_acc = evaluate_padded(&model, dev)?.accuracy;
        log::info!("epoch {epoch}: loss {train_loss:.4} train {train_acc:.4} dev {dev_acc:.4}");
        metrics.push(EpochMetrics {
            epoch,
            train_loss,
            train_acc,
            dev_acc,
        });
        if dev_acc > best.1 {
            best = (model.clone(), dev_acc, epoch);
            stagnant = 0;
        } else {
            stagnant += 1;
            if cfg.patience > 0 && stagnant >= cfg.patience {
                log::info!("early stop after epoch {epoch}");
                break;
            }
        }
    }
    let (model, best_dev, best_epoch) = if metrics.is_empty() {
        let acc = evaluate_padded(&model, dev)?.accuracy;
        (model, acc, 0)
    } else {
        best
    };
    Ok(TrainOutcome {
        model,
        metrics,
        best_epoch,
        best_dev_accuracy: best_dev,
    })
}

pub fn write_metrics(path: impl AsRef<Path>, metrics: &[EpochMetrics]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for m in metrics {
        serde_json::to_writer(&mut out, m)?;
        out.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}
