use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bow::{BowModelKind, ForestConfig, LinearConfig, Scheme};
use crate::cnn::CnnConfig;
use crate::corpus::TaskId;
use crate::embeddings::{W2vConfig, W2vMode};
use crate::util::rng_for;
use crate::{Error, Result};

/// Model families compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "BOW-LR")]
    BowLr,
    #[serde(rename = "BOW-SVM")]
    BowSvm,
    #[serde(rename = "BOW-RF")]
    BowRf,
    #[serde(rename = "CNN")]
    Cnn,
    #[serde(rename = "NAM")]
    Nam,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::BowLr, ModelKind::BowSvm, ModelKind::BowRf, ModelKind::Cnn, ModelKind::Nam];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::BowLr => "BOW-LR",
            ModelKind::BowSvm => "BOW-SVM",
            ModelKind::BowRf => "BOW-RF",
            ModelKind::Cnn => "CNN",
            ModelKind::Nam => "NAM",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, ModelKind::Cnn | ModelKind::Nam)
    }

    pub fn bow_kind(self) -> Option<BowModelKind> {
        match self {
            ModelKind::BowLr => Some(BowModelKind::Lr),
            ModelKind::BowSvm => Some(BowModelKind::Svm),
            ModelKind::BowRf => Some(BowModelKind::Rf),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model {s:?}; expected one of bow-lr, bow-svm, bow-rf, cnn, nam")))
    }
}

/// Where the grid's labeled and unlabeled corpora come from when no files
/// are supplied: both are generated synthetically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSettings {
    pub labeled_docs: usize,
    pub labeled_seed: u64,
    /// `None` generates as many documents as the largest corpus-size axis value.
    pub unlabeled_docs: Option<usize>,
    pub unlabeled_seed: u64,
    /// Train / dev / test sizes.
    pub split: (usize, usize, usize),
}

impl Default for CorpusSettings {
    fn default() -> Self {
        CorpusSettings {
            labeled_docs: 1400,
            labeled_seed: 0,
            unlabeled_docs: None,
            unlabeled_seed: 1000,
            split: (1000, 200, 200),
        }
    }
}

/// Axes of the search plus the fixed settings every cell shares.
///
/// Cells are enumerated as the cross product of the axes in declaration
/// order; axes that do not apply to a model family are not expanded for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentGrid {
    pub tasks: Vec<TaskId>,
    pub models: Vec<ModelKind>,
    pub w2v_dims: Vec<usize>,
    pub w2v_corpus_sizes: Vec<usize>,
    pub w2v_modes: Vec<W2vMode>,
    /// NAM only.
    pub am_num_filters: Vec<usize>,
    /// Bag-of-words models only.
    pub bow_schemes: Vec<Scheme>,
    pub train_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub corpus: CorpusSettings,
    /// Template for CNN and NAM cells; seed and attention are set per cell.
    pub cnn: CnnConfig,
    /// Template for embedding training; dim, mode and seed are set per cell.
    pub w2v: W2vConfig,
    pub linear: LinearConfig,
    pub forest: ForestConfig,
    pub svg: bool,
}

impl Default for ExperimentGrid {
    /// Desk-scale grid: task 2, two baselines against both neural models,
    /// embeddings of dimension 50 and 100 from 20k and 40k documents.
    fn default() -> Self {
        ExperimentGrid {
            tasks: vec![TaskId::new(2).expect("valid task")],
            models: vec![ModelKind::BowLr, ModelKind::BowSvm, ModelKind::Cnn, ModelKind::Nam],
            w2v_dims: vec![50, 100],
            w2v_corpus_sizes: vec![20_000, 40_000],
            w2v_modes: vec![W2vMode::Skip],
            am_num_filters: vec![10],
            bow_schemes: vec![Scheme::Binary, Scheme::Tfidf],
            train_sizes: vec![1000],
            seeds: vec![0],
            corpus: CorpusSettings::default(),
            cnn: CnnConfig {
                n: 200,
                lr: 0.1,
                ..CnnConfig::default()
            },
            w2v: W2vConfig::default(),
            linear: LinearConfig::default(),
            forest: ForestConfig::default(),
            svg: true,
        }
    }
}

/// Embedding table a neural cell is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EmbeddingKey {
    pub dim: usize,
    pub corpus_size: usize,
    pub mode: W2vMode,
    pub seed: u64,
}

/// One point of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    /// Position in enumeration order.
    pub index: usize,
    pub task: TaskId,
    pub model: ModelKind,
    pub embedding: Option<EmbeddingKey>,
    pub am_num_filters: Option<usize>,
    pub bow_scheme: Option<Scheme>,
    pub train_size: usize,
    pub seed: u64,
}

impl GridCell {
    /// Seed for model initialization and training, derived from the grid
    /// seed and the cell index so cells can run in any order.
    pub fn cell_seed(&self) -> u64 {
        rng_for(self.seed, 0xCE11_0000 + self.index as u64).gen()
    }

    pub fn label(&self) -> String {
        let mut parts = vec![self.task.to_string(), self.model.to_string()];
        if let Some(k) = self.embedding {
            parts.push(format!("{}-d{}-u{}", k.mode, k.dim, k.corpus_size));
        }
        if let Some(m) = self.am_num_filters {
            parts.push(format!("am{m}"));
        }
        if let Some(s) = self.bow_scheme {
            parts.push(s.name().to_string());
        }
        parts.push(format!("train{}", self.train_size));
        parts.push(format!("seed{}", self.seed));
        parts.join("/")
    }
}

fn require_nonempty<T>(axis: &str, values: &[T]) -> Result<()> {
    if values.is_empty() {
        Err(Error::InvalidArgument(format!("grid axis {axis} is empty")))
    } else {
        Ok(())
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        require_nonempty("tasks", &self.tasks)?;
        require_nonempty("models", &self.models)?;
        require_nonempty("train_sizes", &self.train_sizes)?;
        require_nonempty("seeds", &self.seeds)?;
        if self.models.iter().any(|m| m.is_neural()) {
            require_nonempty("w2v_dims", &self.w2v_dims)?;
            require_nonempty("w2v_corpus_sizes", &self.w2v_corpus_sizes)?;
            require_nonempty("w2v_modes", &self.w2v_modes)?;
        }
        if self.models.contains(&ModelKind::Nam) {
            require_nonempty("am_num_filters", &self.am_num_filters)?;
        }
        if self.models.iter().any(|m| m.bow_kind().is_some()) {
            require_nonempty("bow_schemes", &self.bow_schemes)?;
        }
        if self.w2v_dims.contains(&0) || self.w2v_corpus_sizes.contains(&0) || self.am_num_filters.contains(&0) {
            return Err(Error::InvalidArgument("grid axis values must be positive".into()));
        }
        if self.train_sizes.iter().any(|&t| t == 0 || t > self.corpus.split.0) {
            return Err(Error::InvalidArgument(format!(
                "train sizes must be in 1..={}",
                self.corpus.split.0
            )));
        }
        self.cnn.validate()?;
        self.w2v.validate()
    }

    /// Largest unlabeled corpus any cell needs.
    pub fn unlabeled_docs_needed(&self) -> usize {
        let max = self.w2v_corpus_sizes.iter().copied().max().unwrap_or(0);
        self.corpus.unlabeled_docs.unwrap_or(max)
    }

    /// Every cell in deterministic order: tasks, models, dims, corpus sizes,
    /// modes, attention filters, schemes, train sizes, seeds.
    pub fn cells(&self) -> Vec<GridCell> {
        let mut out = Vec::new();
        for &task in &self.tasks {
            for &model in &self.models {
                let embeddings: Vec<Option<(usize, usize, W2vMode)>> = if model.is_neural() {
                    let mut v = Vec::new();
                    for &d in &self.w2v_dims {
                        for &u in &self.w2v_corpus_sizes {
                            for &m in &self.w2v_modes {
                                v.push(Some((d, u, m)));
                            }
                        }
                    }
                    v
                } else {
                    vec![None]
                };
                let ams: Vec<Option<usize>> = if model == ModelKind::Nam {
                    self.am_num_filters.iter().map(|&a| Some(a)).collect()
                } else {
                    vec![None]
                };
                let schemes: Vec<Option<Scheme>> = if model.bow_kind().is_some() {
                    self.bow_schemes.iter().map(|&s| Some(s)).collect()
                } else {
                    vec![None]
                };
                for emb in &embeddings {
                    for &am in &ams {
                        for &scheme in &schemes {
                            for &train_size in &self.train_sizes {
                                for &seed in &self.seeds {
                                    out.push(GridCell {
                                        index: out.len(),
                                        task,
                                        model,
                                        embedding: emb.map(|(dim, corpus_size, mode)| EmbeddingKey {
                                            dim,
                                            corpus_size,
                                            mode,
                                            seed,
                                        }),
                                        am_num_filters: am,
                                        bow_scheme: scheme,
                                        train_size,
                                        seed,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}
