use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::{GridCell, ModelKind};
use crate::bow::Scheme;
use crate::corpus::TaskId;
use crate::embeddings::W2vMode;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// One grid cell's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub index: usize,
    pub label: String,
    pub task: TaskId,
    pub model: ModelKind,
    pub w2v_dim: Option<usize>,
    pub w2v_corpus_size: Option<usize>,
    pub w2v_mode: Option<W2vMode>,
    pub am_num_filters: Option<usize>,
    pub bow_scheme: Option<Scheme>,
    pub train_size: usize,
    pub seed: u64,
    pub cell_seed: u64,
    pub status: CellStatus,
    pub error: Option<String>,
    pub dev_accuracy: Option<f64>,
    /// Present only on the dev-selected cell of each (task, model).
    pub test_accuracy: Option<f64>,
    pub selected: bool,
    pub best_epoch: Option<usize>,
    /// Wall-clock seconds; kept out of the CSV so it stays reproducible.
    pub runtime_seconds: f64,
    /// Relative to the output directory.
    pub checkpoint: Option<String>,
    pub cell_hash: String,
}

impl CellRecord {
    pub fn pending(cell: &GridCell, cell_hash: String) -> Self {
        CellRecord {
            index: cell.index,
            label: cell.label(),
            task: cell.task,
            model: cell.model,
            w2v_dim: cell.embedding.map(|k| k.dim),
            w2v_corpus_size: cell.embedding.map(|k| k.corpus_size),
            w2v_mode: cell.embedding.map(|k| k.mode),
            am_num_filters: cell.am_num_filters,
            bow_scheme: cell.bow_scheme,
            train_size: cell.train_size,
            seed: cell.seed,
            cell_seed: cell.cell_seed(),
            status: CellStatus::Failed,
            error: None,
            dev_accuracy: None,
            test_accuracy: None,
            selected: false,
            best_epoch: None,
            runtime_seconds: 0.0,
            checkpoint: None,
            cell_hash,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

const CSV_HEADER: [&str; 20] = [
    "index",
    "label",
    "task",
    "model",
    "w2v_dim",
    "w2v_corpus_size",
    "w2v_mode",
    "am_num_filters",
    "bow_scheme",
    "train_size",
    "seed",
    "cell_seed",
    "status",
    "error",
    "dev_accuracy",
    "test_accuracy",
    "selected",
    "best_epoch",
    "checkpoint",
    "cell_hash",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// All cell records of a grid run, in enumeration order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<CellRecord>,
}

impl ResultTable {
    pub fn new(rows: Vec<CellRecord>) -> Self {
        ResultTable { rows }
    }

    pub fn selected(&self, task: TaskId, model: ModelKind) -> Option<&CellRecord> {
        self.rows.iter().find(|r| r.selected && r.task == task && r.model == model)
    }

    pub fn tasks(&self) -> Vec<TaskId> {
        let mut t: Vec<TaskId> = self.rows.iter().map(|r| r.task).collect();
        t.sort();
        t.dedup();
        t
    }

    pub fn models(&self) -> Vec<ModelKind> {
        let mut m: Vec<ModelKind> = self.rows.iter().map(|r| r.model).collect();
        m.sort();
        m.dedup();
        m
    }

    /// Marks the dev-argmax cell of every (task, model) as selected; ties go
    /// to the earliest cell. Returns the selected row positions.
    pub fn select(&mut self) -> BTreeMap<(TaskId, ModelKind), usize> {
        let mut best: BTreeMap<(TaskId, ModelKind), usize> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            let Some(dev) = r.dev_accuracy.filter(|_| r.is_ok()) else {
                continue;
            };
            let slot = best.entry((r.task, r.model)).or_insert(i);
            if dev > self.rows[*slot].dev_accuracy.unwrap_or(f64::NEG_INFINITY) {
                *slot = i;
            }
        }
        for (i, r) in self.rows.iter_mut().enumerate() {
            r.selected = best.values().any(|&b| b == i);
            if !r.selected {
                r.test_accuracy = None;
            }
        }
        best
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let map = |e: csv::Error| Error::Data(format!("csv: {e}"));
        w.write_record(CSV_HEADER).map_err(map)?;
        for r in &self.rows {
            w.write_record([
                r.index.to_string(),
                r.label.clone(),
                r.task.get().to_string(),
                r.model.to_string(),
                opt(r.w2v_dim),
                opt(r.w2v_corpus_size),
                opt(r.w2v_mode),
                opt(r.am_num_filters),
                opt(r.bow_scheme.map(Scheme::name)),
                r.train_size.to_string(),
                r.seed.to_string(),
                r.cell_seed.to_string(),
                match r.status {
                    CellStatus::Ok => "ok".into(),
                    CellStatus::Failed => "failed".into(),
                },
                r.error.clone().unwrap_or_default(),
                opt(r.dev_accuracy),
                opt(r.test_accuracy),
                r.selected.to_string(),
                opt(r.best_epoch),
                r.checkpoint.clone().unwrap_or_default(),
                r.cell_hash.clone(),
            ])
            .map_err(map)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Data(format!("csv: {e}")))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        for r in &self.rows {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut rows = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row = serde_json::from_str(&line)
                .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), n + 1)))?;
            rows.push(row);
        }
        Ok(ResultTable { rows })
    }
}
