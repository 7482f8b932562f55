//! Documents, vocabularies, padding, stratified splits, and the synthetic
//! report generator.

mod io;
mod split;
mod synthetic;
mod tokenize;
mod vocab;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{read_corpus, read_manifest, write_corpus, write_manifest, SplitManifest};
pub use split::{largest_remainder_targets, stratified_split, CorpusSplit};
pub use synthetic::{
    default_lexicon, generate_synthetic, locate_phrase, relabel, PhraseMatch, SyntheticCorpus,
    SyntheticSpec, TaskLexicon,
};
pub use tokenize::tokenize;
pub use vocab::{Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

/// Number of severity levels per task.
pub const NUM_CLASSES: usize = 3;

/// One of the five classification tasks, numbered 1 through 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct TaskId(u8);

impl TaskId {
    pub const ALL: [TaskId; 5] = [TaskId(1), TaskId(2), TaskId(3), TaskId(4), TaskId(5)];

    pub fn new(id: u8) -> Result<Self> {
        if (1..=5).contains(&id) {
            Ok(TaskId(id))
        } else {
            Err(Error::InvalidArgument(format!("task id must be in 1..=5, got {id}")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Key used in the corpus file's `labels` object.
    pub fn key(self) -> String {
        format!("task{}", self.0)
    }

    pub fn name(self) -> &'static str {
        match self.0 {
            1 => "Severity of Study",
            2 => "Acute Intracranial Bleed",
            3 => "Acute Mass Effect",
            4 => "Acute Stroke",
            _ => "Acute Hydrocephalus",
        }
    }
}

impl TryFrom<u8> for TaskId {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        TaskId::new(v)
    }
}

impl From<TaskId> for u8 {
    fn from(t: TaskId) -> u8 {
        t.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "task{}", self.0)
    }
}

/// A tokenized report with its per-task severity labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
    pub labels: BTreeMap<TaskId, u8>,
    pub raw_text: String,
}

impl Document {
    /// Tokenizes `raw_text` and validates every label.
    pub fn new(
        id: impl Into<String>,
        raw_text: impl Into<String>,
        labels: BTreeMap<TaskId, u8>,
    ) -> Result<Self> {
        let raw_text = raw_text.into();
        let id = id.into();
        if let Some((t, l)) = labels.iter().find(|(_, &l)| l as usize >= NUM_CLASSES) {
            return Err(Error::Data(format!("document {id}: {t} label {l} is not in 0..=2")));
        }
        Ok(Document {
            tokens: tokenize(&raw_text),
            id,
            labels,
            raw_text,
        })
    }

    /// Builds a document directly from tokens; `raw_text` becomes their space-joined form.
    pub fn from_tokens(id: impl Into<String>, tokens: Vec<String>, labels: BTreeMap<TaskId, u8>) -> Result<Self> {
        let raw = tokens.join(" ");
        let doc = Document::new(id, raw, labels)?;
        Ok(doc)
    }

    pub fn label(&self, task: TaskId) -> Option<usize> {
        self.labels.get(&task).map(|&l| l as usize)
    }

    pub(crate) fn require_label(&self, task: TaskId) -> Result<usize> {
        self.label(task)
            .ok_or_else(|| Error::Data(format!("document {} has no label for {task}", self.id)))
    }
}

/// Fixed-length index sequence fed to the convolutional models.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedDocument {
    pub indices: Vec<usize>,
    /// Number of leading positions holding real (possibly UNK) tokens.
    pub length: usize,
}

impl PaddedDocument {
    pub fn n(&self) -> usize {
        self.indices.len()
    }
}

/// Maps tokens to indices, truncating to the first `n` tokens and padding with [`PAD`].
pub fn pad_document(tokens: &[String], vocab: &Vocabulary, n: usize) -> Result<PaddedDocument> {
    if n == 0 {
        return Err(Error::InvalidArgument("document length n must be >= 1".into()));
    }
    let length = tokens.len().min(n);
    let mut indices = Vec::with_capacity(n);
    indices.extend(tokens[..length].iter().map(|t| vocab.index_or_unk(t)));
    indices.resize(n, PAD);
    Ok(PaddedDocument { indices, length })
}
