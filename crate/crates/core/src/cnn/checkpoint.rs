use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CnnConfig, CnnModel, CnnParams};
use crate::corpus::{TaskId, Vocabulary};
use crate::util::{read_json, write_json_pretty};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-contained checkpoint: the vocabulary and embedding travel with the
/// model so it can be evaluated without the original embedding file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnCheckpoint {
    pub version: u32,
    pub model_kind: String,
    pub task: Option<TaskId>,
    pub vocab_hash: String,
    pub embedding_hash: String,
    pub config: CnnConfig,
    pub vocabulary: Vocabulary,
    pub params: CnnParams,
    /// Corpus the model was trained from, when recorded by the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_corpus: Option<String>,
}

impl CnnCheckpoint {
    pub fn from_model(model: &CnnModel, task: Option<TaskId>) -> Self {
        CnnCheckpoint {
            version: CHECKPOINT_VERSION,
            model_kind: if model.has_attention() { "NAM" } else { "CNN" }.into(),
            task,
            vocab_hash: model.vocab.hash(),
            embedding_hash: model.embedding_hash.clone(),
            config: model.config.clone(),
            vocabulary: model.vocab.clone(),
            params: model.params.clone(),
            source_corpus: None,
        }
    }

    pub fn into_model(self) -> Result<CnnModel> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!("unsupported CNN checkpoint version {}", self.version)));
        }
        if self.vocabulary.hash() != self.vocab_hash {
            return Err(Error::Data("CNN checkpoint vocabulary does not match its hash".into()));
        }
        let mut model = CnnModel::from_parts(self.config, self.vocabulary, self.params)?;
        model.embedding_hash = self.embedding_hash;
        Ok(model)
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &CnnModel, task: Option<TaskId>) -> Result<()> {
    write_json_pretty(path.as_ref(), &CnnCheckpoint::from_model(model, task))
}

/// Returns the model and the task it was trained for, if recorded.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(CnnModel, Option<TaskId>)> {
    let ckpt: CnnCheckpoint = read_json(path.as_ref())?;
    let task = ckpt.task;
    Ok((ckpt.into_model()?, task))
}
