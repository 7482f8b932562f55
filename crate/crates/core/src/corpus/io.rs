use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusSplit, Document, TaskId};
use crate::util::{read_json, write_json_pretty};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct CorpusRecord {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    labels: BTreeMap<String, u8>,
}

impl Document {
    /// Parses one corpus record: `{"id", "text", "labels": {"task1": 0, ...}}`.
    pub fn from_json(line: &str) -> Result<Self> {
        let rec: CorpusRecord = serde_json::from_str(line).map_err(|e| Error::Data(e.to_string()))?;
        let mut labels = BTreeMap::new();
        for (key, value) in rec.labels {
            let task = key
                .strip_prefix("task")
                .and_then(|n| n.parse::<u8>().ok())
                .ok_or_else(|| Error::Data(format!("unknown label key {key:?}")))
                .and_then(|n| TaskId::new(n).map_err(|e| Error::Data(e.to_string())))?;
            labels.insert(task, value);
        }
        Document::new(rec.id, rec.text, labels)
    }

    /// The corpus-file form of this document, on one line.
    pub fn to_json(&self) -> String {
        let rec = CorpusRecord {
            id: self.id.clone(),
            text: self.raw_text.clone(),
            labels: self.labels.iter().map(|(t, l)| (t.key(), *l)).collect(),
        };
        serde_json::to_string(&rec).expect("corpus records always serialize")
    }
}

/// Reads a JSON Lines corpus, one [`Document::from_json`] record per line.
pub fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = Document::from_json(&line).map_err(|e| {
            let msg = match e {
                Error::Data(m) => m,
                other => other.to_string(),
            };
            Error::Data(format!("{}:{}: {msg}", path.display(), lineno + 1))
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus(path: &Path, docs: &[Document]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for d in docs {
        w.write_all(d.to_json().as_bytes()).map_err(|e| Error::io(path, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Document ids per split, as written next to experiment outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub task: TaskId,
    pub seed: u64,
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl SplitManifest {
    pub fn from_split(split: &CorpusSplit, seed: u64) -> Self {
        let ids = |docs: &[Document]| docs.iter().map(|d| d.id.clone()).collect();
        SplitManifest {
            task: split.task,
            seed,
            train: ids(&split.train),
            dev: ids(&split.dev),
            test: ids(&split.test),
        }
    }

    /// Re-materializes the split from a corpus containing every listed id.
    pub fn apply(&self, docs: &[Document]) -> Result<CorpusSplit> {
        let by_id: BTreeMap<&str, &Document> = docs.iter().map(|d| (d.id.as_str(), d)).collect();
        let pick = |ids: &[String]| -> Result<Vec<Document>> {
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .map(|d| (*d).clone())
                        .ok_or_else(|| Error::Data(format!("split manifest names unknown document {id}")))
                })
                .collect()
        };
        Ok(CorpusSplit {
            task: self.task,
            train: pick(&self.train)?,
            dev: pick(&self.dev)?,
            test: pick(&self.test)?,
        })
    }
}

pub fn write_manifest(path: &Path, manifest: &SplitManifest) -> Result<()> {
    write_json_pretty(path, manifest)
}

pub fn read_manifest(path: &Path) -> Result<SplitManifest> {
    read_json(path)
}
