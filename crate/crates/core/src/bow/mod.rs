//! Bag-of-words representations and the non-neural baselines.

mod classifier;
mod forest;
mod linear;
mod vectorize;

use serde::{Deserialize, Serialize};

pub use classifier::{BowClassifier, BowModel, BowModelKind};
pub use forest::{train_forest, DecisionTree, ForestConfig, Node, RandomForestModel};
pub use linear::{train_linear, LinearConfig, LinearModel, Loss};
pub use vectorize::{fit_idf, vectorize, BowVector, IdfTable, Scheme, Stopwords};

/// Predicted label with the per-class scores it was taken from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    pub scores: Vec<f64>,
}
