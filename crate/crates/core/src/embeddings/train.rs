use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::{EmbeddingTable, W2vConfig, W2vMode};
use crate::corpus::{Vocabulary, UNK};
use crate::neural::sigmoid;
use crate::util::{rng_for, Rng as ChaRng};
use crate::{Error, Result};

use super::sgns::log_sigmoid;

#[derive(Debug, Clone)]
pub struct TrainedEmbeddings {
    pub table: EmbeddingTable,
    /// Mean SGNS objective per scored (target, label) pair, one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains word vectors over `corpus`, one window-bounded sequence per document.
pub fn train_embeddings<D: AsRef<[String]>>(corpus: &[D], config: &W2vConfig) -> Result<TrainedEmbeddings> {
    config.validate()?;
    let vocab = Vocabulary::build(corpus.iter().map(|d| d.as_ref()), config.min_count)?;
    if vocab.is_empty() {
        return Err(Error::Data(format!(
            "embedding corpus is empty after min_count={} filtering",
            config.min_count
        )));
    }
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|d| d.as_ref().iter().filter_map(|t| vocab.get(t)).collect::<Vec<_>>())
        .filter(|s: &Vec<usize>| !s.is_empty())
        .collect();
    let mut trainer = Trainer::new(vocab, config)?;
    let total_words: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng = rng_for(config.seed, epoch as u64);
        let (mut loss, mut pairs) = (0.0, 0u64);
        for sentence in &sentences {
            let (l, p) = trainer.train_sentence(sentence, total_words, &mut rng);
            loss += l;
            pairs += p;
        }
        let mean = if pairs == 0 { 0.0 } else { loss / pairs as f64 };
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        log::info!("word2vec {} epoch {epoch}: mean loss {mean:.5}", config.mode);
        epoch_losses.push(mean);
    }
    let table = EmbeddingTable::new(trainer.vocab, trainer.dim, trainer.input, trainer.output)?;
    Ok(TrainedEmbeddings { table, epoch_losses })
}

struct Trainer {
    vocab: Vocabulary,
    dim: usize,
    input: Vec<f32>,
    output: Vec<f32>,
    noise: WeightedIndex<f64>,
    keep_prob: Vec<f64>,
    mode: W2vMode,
    window: usize,
    negatives: usize,
    epochs: usize,
    initial_lr: f64,
    words_seen: u64,
    neu1: Vec<f32>,
    neu1e: Vec<f32>,
}

impl Trainer {
    fn new(vocab: Vocabulary, config: &W2vConfig) -> Result<Self> {
        let dim = config.dim;
        let v = vocab.len();
        let mut rng = rng_for(config.seed, u64::MAX);
        let bound = 0.5 / dim as f32;
        let mut input = vec![0.0f32; v * dim];
        for x in &mut input[(UNK + 1) * dim..] {
            *x = rng.gen_range(-bound..bound);
        }
        // Reserved rows never appear in training sequences; zero weight keeps
        // them out of the noise distribution.
        let weights: Vec<f64> = vocab
            .frequencies()
            .iter()
            .enumerate()
            .map(|(i, &f)| if i <= UNK { 0.0 } else { (f as f64).powf(0.75) })
            .collect();
        let noise = WeightedIndex::new(&weights)
            .map_err(|e| Error::Data(format!("cannot build noise distribution: {e}")))?;
        let total: f64 = vocab.frequencies().iter().map(|&f| f as f64).sum();
        let t = config.subsample_threshold * total;
        let keep_prob = vocab
            .frequencies()
            .iter()
            .map(|&f| {
                if t <= 0.0 || f == 0 {
                    1.0
                } else {
                    let f = f as f64;
                    ((f / t).sqrt() + 1.0) * t / f
                }
            })
            .collect();
        Ok(Trainer {
            vocab,
            dim,
            input,
            output: vec![0.0; v * dim],
            noise,
            keep_prob,
            mode: config.mode,
            window: config.window,
            negatives: config.negatives,
            epochs: config.epochs,
            initial_lr: config.learning_rate(),
            words_seen: 0,
            neu1: vec![0.0; dim],
            neu1e: vec![0.0; dim],
        })
    }

    fn learning_rate(&self, total_words: u64) -> f32 {
        let progress = self.words_seen as f64 / (self.epochs as f64 * total_words as f64 + 1.0);
        (self.initial_lr * (1.0 - progress).max(1e-4)) as f32
    }

    /// Returns the summed loss and number of scored pairs.
    fn train_sentence(&mut self, sentence: &[usize], total_words: u64, rng: &mut ChaRng) -> (f64, u64) {
        let kept: Vec<usize> = sentence
            .iter()
            .copied()
            .filter(|&w| {
                let p = self.keep_prob[w];
                p >= 1.0 || p >= rng.gen::<f64>()
            })
            .collect();
        let lr = self.learning_rate(total_words);
        self.words_seen += sentence.len() as u64;
        let (mut loss, mut pairs) = (0.0, 0u64);
        for pos in 0..kept.len() {
            let shrink = rng.gen_range(0..self.window);
            let span = self.window - shrink;
            let lo = pos.saturating_sub(span);
            let hi = (pos + span).min(kept.len() - 1);
            let center = kept[pos];
            match self.mode {
                W2vMode::Skip => {
                    for c in lo..=hi {
                        if c == pos {
                            continue;
                        }
                        let (l, p) = self.skipgram_pair(center, kept[c], lr, rng);
                        loss += l;
                        pairs += p;
                    }
                }
                W2vMode::Cbow => {
                    let context: Vec<usize> = (lo..=hi).filter(|&c| c != pos).map(|c| kept[c]).collect();
                    if context.is_empty() {
                        continue;
                    }
                    let (l, p) = self.cbow_window(center, &context, lr, rng);
                    loss += l;
                    pairs += p;
                }
            }
        }
        (loss, pairs)
    }

    fn draw_targets(&self, positive: usize, rng: &mut ChaRng) -> Vec<(usize, f32)> {
        let mut targets = Vec::with_capacity(self.negatives + 1);
        targets.push((positive, 1.0));
        for _ in 0..self.negatives {
            let n = self.noise.sample(rng);
            if n != positive {
                targets.push((n, 0.0));
            }
        }
        targets
    }

    fn skipgram_pair(&mut self, center: usize, context: usize, lr: f32, rng: &mut ChaRng) -> (f64, u64) {
        let targets = self.draw_targets(context, rng);
        let d = self.dim;
        self.neu1.copy_from_slice(&self.input[center * d..(center + 1) * d]);
        let loss = score_targets(&self.neu1, &mut self.neu1e, &mut self.output, d, &targets, lr);
        for (w, g) in self.input[center * d..(center + 1) * d].iter_mut().zip(&self.neu1e) {
            *w += g;
        }
        (loss, targets.len() as u64)
    }

    fn cbow_window(&mut self, center: usize, context: &[usize], lr: f32, rng: &mut ChaRng) -> (f64, u64) {
        let targets = self.draw_targets(center, rng);
        let d = self.dim;
        self.neu1.iter_mut().for_each(|x| *x = 0.0);
        for &c in context {
            for (h, x) in self.neu1.iter_mut().zip(&self.input[c * d..(c + 1) * d]) {
                *h += x;
            }
        }
        let inv = 1.0 / context.len() as f32;
        self.neu1.iter_mut().for_each(|x| *x *= inv);
        let loss = score_targets(&self.neu1, &mut self.neu1e, &mut self.output, d, &targets, lr);
        // Reference convention: the full error goes to every context word.
        for &c in context {
            for (w, g) in self.input[c * d..(c + 1) * d].iter_mut().zip(&self.neu1e) {
                *w += g;
            }
        }
        (loss, targets.len() as u64)
    }
}

/// One SGD step of the negative-sampling objective for hidden vector `h`.
/// Updates the output rows in place and leaves the hidden-vector update in
/// `neu1e`. Returns the loss before the step.
fn score_targets(
    h: &[f32],
    neu1e: &mut [f32],
    output: &mut [f32],
    d: usize,
    targets: &[(usize, f32)],
    lr: f32,
) -> f64 {
    neu1e.iter_mut().for_each(|x| *x = 0.0);
    let mut loss = 0.0;
    for &(t, label) in targets {
        let row = &mut output[t * d..(t + 1) * d];
        let f: f32 = h.iter().zip(row.iter()).map(|(a, b)| a * b).sum();
        let f64_score = f as f64;
        loss -= if label > 0.5 {
            log_sigmoid(f64_score)
        } else {
            log_sigmoid(-f64_score)
        };
        let g = (label - sigmoid(f64_score) as f32) * lr;
        for ((e, o), x) in neu1e.iter_mut().zip(row.iter_mut()).zip(h) {
            *e += g * *o;
            *o += g * x;
        }
    }
    loss
}
