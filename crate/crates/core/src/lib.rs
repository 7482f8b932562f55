//! Document classification with bag-of-words baselines, word2vec embeddings,
//! a single-layer convolutional classifier and its embedding-attention
//! extension (NAM), plus the experiment harness that ties them together.
//!
//! The crate is organised bottom-up:
//!
//! * [`corpus`]: tokenization, vocabularies, padding, stratified splits and a
//!   synthetic radiology-style corpus generator.
//! * [`bow`]: TF / TF-norm / binary / TF-IDF vectors with logistic regression,
//!   hinge-loss SVM and random forest classifiers.
//! * [`embeddings`]: skip-gram and CBOW with negative sampling.
//! * [`neural`]: dense numerics shared by the convolutional models.
//! * [`cnn`]: the convolutional classifier and its training loop.
//! * [`attention`]: the embedding attention vector pathway and explanations.
//! * [`harness`]: grid search, reports, trend files and heatmaps.
//! * [`cli`]: the `eavnet` command line.

pub mod attention;
pub mod bow;
pub mod cli;
pub mod cnn;
pub mod corpus;
pub mod embeddings;
mod error;
pub mod harness;
pub mod neural;
pub(crate) mod util;

pub use error::{Error, Result};
