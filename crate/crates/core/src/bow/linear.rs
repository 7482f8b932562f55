use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{BowVector, Prediction};
use crate::neural::sigmoid;
use crate::util::{argmax, rng_for};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Loss {
    Log,
    Hinge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearConfig {
    pub loss: Loss,
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            loss: Loss::Log,
            l2: 1e-4,
            lr: 0.1,
            epochs: 50,
            seed: 0,
        }
    }
}

/// One-vs-rest linear classifier; `weights[c]` spans the whole vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub loss: Loss,
    pub l2: f64,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Regularized training objective after the last epoch, averaged over classes.
    pub objective: f64,
}

impl LinearModel {
    pub fn zeros(loss: Loss, l2: f64, num_features: usize, num_classes: usize) -> Self {
        LinearModel {
            loss,
            l2,
            weights: vec![vec![0.0; num_features]; num_classes],
            bias: vec![0.0; num_classes],
            objective: f64::NAN,
        }
    }

    pub fn num_features(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    /// Raw margins `w_c·x + b_c`.
    pub fn scores(&self, x: &BowVector) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| x.iter().filter(|&(i, _)| i < w.len()).map(|(i, v)| v * w[i]).sum::<f64>() + b)
            .collect()
    }

    /// Per-class one-vs-rest probabilities `σ(w_c·x + b_c)`.
    pub fn predict_proba(&self, x: &BowVector) -> Vec<f64> {
        self.scores(x).into_iter().map(sigmoid).collect()
    }

    pub fn predict(&self, x: &BowVector) -> Prediction {
        let scores = self.scores(x);
        Prediction {
            label: argmax(&scores),
            scores,
        }
    }

    /// One stochastic subgradient step for the binary problem of `class`
    /// with target `y ∈ {-1, +1}`.
    pub fn sgd_step(&mut self, class: usize, x: &BowVector, y: f64, lr: f64) {
        let w = &mut self.weights[class];
        let margin = y * (x.dot(w) + self.bias[class]);
        let coeff = match self.loss {
            Loss::Hinge => {
                if margin < 1.0 {
                    y
                } else {
                    0.0
                }
            }
            Loss::Log => y * (1.0 - sigmoid(margin)),
        };
        let decay = 1.0 - lr * self.l2;
        if decay != 1.0 {
            w.iter_mut().for_each(|v| *v *= decay);
        }
        if coeff != 0.0 {
            for (i, v) in x.iter() {
                w[i] += lr * coeff * v;
            }
            self.bias[class] += lr * coeff;
        }
    }

    fn binary_loss(&self, margin: f64) -> f64 {
        match self.loss {
            Loss::Hinge => (1.0 - margin).max(0.0),
            Loss::Log => -crate::embeddings::log_sigmoid(margin),
        }
    }

    fn objective_on(&self, xs: &[BowVector], ys: &[usize]) -> f64 {
        let mut total = 0.0;
        for (c, w) in self.weights.iter().enumerate() {
            let data: f64 = xs
                .iter()
                .zip(ys)
                .map(|(x, &y)| {
                    let t = if y == c { 1.0 } else { -1.0 };
                    self.binary_loss(t * (x.dot(w) + self.bias[c]))
                })
                .sum::<f64>()
                / xs.len() as f64;
            let reg = 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
            total += data + reg;
        }
        total / self.num_classes() as f64
    }
}

/// One-vs-rest SGD over `xs`, shuffled each epoch from `(seed, epoch)`.
pub fn train_linear(
    xs: &[BowVector],
    ys: &[usize],
    num_features: usize,
    num_classes: usize,
    config: &LinearConfig,
) -> Result<LinearModel> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("{} vectors but {} labels", xs.len(), ys.len())));
    }
    if xs.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if let Some(&bad) = ys.iter().find(|&&y| y >= num_classes) {
        return Err(Error::Data(format!("label {bad} out of range for {num_classes} classes")));
    }
    if ys.iter().all(|&y| y == ys[0]) {
        return Err(Error::Data(format!(
            "training set contains a single class ({}); at least two are required",
            ys[0]
        )));
    }
    if let Some(i) = xs.iter().flat_map(|x| x.iter()).map(|(i, _)| i).find(|&i| i >= num_features) {
        return Err(Error::Shape(format!("feature index {i} exceeds {num_features} features")));
    }
    let mut model = LinearModel::zeros(config.loss, config.l2, num_features, num_classes);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng_for(config.seed, epoch as u64));
        for &i in &order {
            for c in 0..num_classes {
                let y = if ys[i] == c { 1.0 } else { -1.0 };
                model.sgd_step(c, &xs[i], y, config.lr);
            }
        }
    }
    model.objective = model.objective_on(xs, ys);
    if !model.objective.is_finite() {
        return Err(Error::Diverged {
            epoch: config.epochs,
            loss: model.objective,
        });
    }
    Ok(model)
}
