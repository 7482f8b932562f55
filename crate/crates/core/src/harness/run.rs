use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::grid::{EmbeddingKey, ExperimentGrid, GridCell, ModelKind};
use super::heatmap::emit_heatmap;
use super::report::{emit_comparison, emit_trends};
use super::table::{CellRecord, CellStatus, ResultTable};
use crate::attention::{explain, AttentionConfig};
use crate::bow::{BowClassifier, Stopwords};
use crate::cnn::{evaluate, fit_cnn, load_checkpoint, save_checkpoint, write_metrics};
use crate::corpus::{
    generate_synthetic, read_corpus, stratified_split, write_corpus, write_manifest, CorpusSplit, Document, SplitManifest,
    SyntheticSpec, TaskId,
};
use crate::embeddings::{read_binary, train_embeddings, write_binary, EmbeddingTable, W2vConfig};
use crate::util::{ensure_dir, read_json, sha256_hex, write_json_pretty};
use crate::{Error, Result};

/// Bumped whenever cell semantics change, so stale cached cells are retrained.
const CELL_FORMAT: u32 = 1;

/// Corpus files for a grid run; missing entries are generated from
/// [`ExperimentGrid::corpus`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridInputs {
    pub labeled: Option<PathBuf>,
    pub unlabeled: Option<PathBuf>,
}

/// Persisted result of a finished cell, keyed by its content hash.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CachedCell {
    dev_accuracy: f64,
    best_epoch: Option<usize>,
    runtime_seconds: f64,
    checkpoint: String,
}

struct LoadedCorpus {
    docs: Vec<Document>,
    hash: String,
}

struct Context<'a> {
    grid: &'a ExperimentGrid,
    out: &'a Path,
    labeled: LoadedCorpus,
    unlabeled: Option<LoadedCorpus>,
    splits: BTreeMap<(TaskId, u64), Rc<CorpusSplit>>,
    embeddings: BTreeMap<EmbeddingKey, Rc<EmbeddingTable>>,
}

fn load_corpus(path: &Path) -> Result<LoadedCorpus> {
    if !path.exists() {
        return Err(Error::Data(format!("corpus {} does not exist", path.display())));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(LoadedCorpus {
        docs: read_corpus(path)?,
        hash: sha256_hex(&bytes),
    })
}

/// Generates (once) and loads a synthetic corpus under `out/corpora`.
fn synthetic_corpus(out: &Path, name: &str, spec: &SyntheticSpec) -> Result<LoadedCorpus> {
    let key = sha256_hex(serde_json::to_string(spec)?.as_bytes());
    let path = out.join("corpora").join(format!("{name}-{}.jsonl", &key[..12]));
    if !path.exists() {
        log::info!("generating {} synthetic documents into {}", spec.num_documents, path.display());
        let corpus = generate_synthetic(spec)?;
        write_corpus(&path, &corpus.documents)?;
    }
    load_corpus(&path)
}

impl<'a> Context<'a> {
    fn split(&mut self, task: TaskId, seed: u64) -> Result<Rc<CorpusSplit>> {
        if let Some(s) = self.splits.get(&(task, seed)) {
            return Ok(s.clone());
        }
        let split = stratified_split(&self.labeled.docs, task, self.grid.corpus.split, seed)?;
        let manifest = self.out.join("splits").join(format!("{task}-seed{seed}.json"));
        write_manifest(&manifest, &SplitManifest::from_split(&split, seed))?;
        let split = Rc::new(split);
        self.splits.insert((task, seed), split.clone());
        Ok(split)
    }

    fn w2v_config(&self, key: &EmbeddingKey) -> W2vConfig {
        W2vConfig {
            dim: key.dim,
            mode: key.mode,
            seed: key.seed,
            ..self.grid.w2v.clone()
        }
    }

    fn embedding(&mut self, key: EmbeddingKey) -> Result<Rc<EmbeddingTable>> {
        if let Some(e) = self.embeddings.get(&key) {
            return Ok(e.clone());
        }
        let unlabeled = self
            .unlabeled
            .as_ref()
            .ok_or_else(|| Error::Data("neural cells need an unlabeled corpus".into()))?;
        let cfg = self.w2v_config(&key);
        let hash = sha256_hex(format!("{}|{}|{}", unlabeled.hash, serde_json::to_string(&cfg)?, key.corpus_size).as_bytes());
        let path = self.out.join("embeddings").join(format!(
            "{}-d{}-u{}-s{}-{}.bin",
            key.mode.to_string().to_lowercase(),
            key.dim,
            key.corpus_size,
            key.seed,
            &hash[..12]
        ));
        let table = if path.exists() {
            read_binary(&path)?
        } else {
            if unlabeled.docs.len() < key.corpus_size {
                return Err(Error::Data(format!(
                    "unlabeled corpus has {} documents but the grid asks for {}",
                    unlabeled.docs.len(),
                    key.corpus_size
                )));
            }
            log::info!("training {} embeddings: d={} on {} documents", key.mode, key.dim, key.corpus_size);
            let docs: Vec<&[String]> = unlabeled.docs[..key.corpus_size].iter().map(|d| d.tokens.as_slice()).collect();
            let trained = train_embeddings(&docs, &cfg)?;
            write_binary(&path, &trained.table)?;
            trained.table
        };
        let table = Rc::new(table);
        self.embeddings.insert(key, table.clone());
        Ok(table)
    }

    fn cell_hash(&self, cell: &GridCell) -> Result<String> {
        let g = self.grid;
        let mut v = json!({
            "format": CELL_FORMAT,
            "cell": cell,
            "cell_seed": cell.cell_seed(),
            "labeled": self.labeled.hash,
            "split": g.corpus.split,
        });
        if cell.model.is_neural() {
            v["cnn"] = serde_json::to_value(&g.cnn)?;
            v["w2v"] = serde_json::to_value(&g.w2v)?;
            v["unlabeled"] = json!(self.unlabeled.as_ref().map(|u| u.hash.clone()));
        } else {
            v["linear"] = serde_json::to_value(&g.linear)?;
            v["forest"] = serde_json::to_value(&g.forest)?;
        }
        Ok(sha256_hex(serde_json::to_string(&v)?.as_bytes()))
    }

    fn train_docs(&mut self, cell: &GridCell) -> Result<(Rc<CorpusSplit>, Vec<Document>)> {
        let split = self.split(cell.task, cell.seed)?;
        let train = if cell.train_size >= split.train.len() {
            split.train.clone()
        } else {
            let n = split.train.len();
            stratified_split(&split.train, cell.task, (cell.train_size, 0, n - cell.train_size), cell.seed)?.train
        };
        Ok((split, train))
    }

    /// Trains one cell; returns its dev accuracy, best epoch and checkpoint.
    fn run_cell(&mut self, cell: &GridCell, hash: &str) -> Result<CachedCell> {
        let start = Instant::now();
        let (split, train) = self.train_docs(cell)?;
        let name = format!("{}-{}", cell.model.name().to_lowercase(), &hash[..16]);
        let seed = cell.cell_seed();
        let (dev_accuracy, best_epoch, checkpoint) = if let Some(kind) = cell.model.bow_kind() {
            let scheme = cell.bow_scheme.expect("bag-of-words cells carry a scheme");
            let linear = crate::bow::LinearConfig { seed, ..self.grid.linear.clone() };
            let forest = crate::bow::ForestConfig { seed, ..self.grid.forest.clone() };
            let clf = BowClassifier::fit_with(&train, cell.task, kind, scheme, &Stopwords::english(), &linear, &forest)?;
            let rel = format!("checkpoints/{name}.json");
            clf.save(self.out.join(&rel))?;
            (clf.accuracy(&split.dev)?, None, rel)
        } else {
            let key = cell.embedding.expect("neural cells carry an embedding key");
            let table = self.embedding(key)?;
            let mut cfg = self.grid.cnn.clone();
            cfg.seed = seed;
            cfg.attention = match cell.model {
                ModelKind::Nam => Some(AttentionConfig {
                    num_filters: cell.am_num_filters.expect("NAM cells carry a filter count"),
                    ..self.grid.cnn.attention.clone().unwrap_or_default()
                }),
                _ => None,
            };
            let outcome = fit_cnn(cfg, &table, &train, &split.dev, cell.task)?;
            let rel = format!("checkpoints/{name}.json");
            save_checkpoint(self.out.join(&rel), &outcome.model, Some(cell.task))?;
            write_metrics(self.out.join(format!("checkpoints/{name}.metrics.jsonl")), &outcome.metrics)?;
            (outcome.best_dev_accuracy, Some(outcome.best_epoch), rel)
        };
        Ok(CachedCell {
            dev_accuracy,
            best_epoch,
            runtime_seconds: start.elapsed().as_secs_f64(),
            checkpoint,
        })
    }

    fn test_accuracy(&mut self, record: &CellRecord) -> Result<f64> {
        let split = self.split(record.task, record.seed)?;
        let path = self.out.join(record.checkpoint.as_deref().unwrap_or_default());
        if record.model.is_neural() {
            let (model, _) = load_checkpoint(&path)?;
            Ok(evaluate(&model, &split.test, record.task)?.accuracy)
        } else {
            BowClassifier::load(&path)?.accuracy(&split.test)
        }
    }

    fn write_heatmap(&mut self, record: &CellRecord) -> Result<()> {
        let split = self.split(record.task, record.seed)?;
        let (model, _) = load_checkpoint(self.out.join(record.checkpoint.as_deref().unwrap_or_default()))?;
        if let Some(doc) = split.test.first() {
            let e = explain(&model, &doc.tokens)?;
            let path = self.out.join("heatmaps").join(format!("{}-{}.html", record.task, record.model));
            emit_heatmap(&e, Some(record.task), path)?;
        }
        Ok(())
    }
}

/// Trains and dev-scores every cell, test-scores the dev-selected cell of
/// each (task, model), and writes all artifacts under `out`.
///
/// Finished cells are cached under `out/cells` by content hash, so an
/// interrupted run resumes where it stopped and produces the same table.
/// A failing cell is recorded and the grid continues.
pub fn run_grid(grid: &ExperimentGrid, inputs: &GridInputs, out: impl AsRef<Path>) -> Result<ResultTable> {
    let out = out.as_ref();
    grid.validate()?;
    for sub in ["corpora", "cells", "checkpoints", "embeddings", "splits", "trends", "heatmaps"] {
        ensure_dir(&out.join(sub))?;
    }
    let labeled = match &inputs.labeled {
        Some(p) => load_corpus(p)?,
        None => synthetic_corpus(
            out,
            "labeled",
            &SyntheticSpec {
                num_documents: grid.corpus.labeled_docs,
                seed: grid.corpus.labeled_seed,
                ..Default::default()
            },
        )?,
    };
    let needs_unlabeled = grid.models.iter().any(|m| m.is_neural());
    let unlabeled = match (&inputs.unlabeled, needs_unlabeled) {
        (_, false) => None,
        (Some(p), true) => Some(load_corpus(p)?),
        (None, true) => Some(synthetic_corpus(
            out,
            "unlabeled",
            &SyntheticSpec {
                num_documents: grid.unlabeled_docs_needed(),
                seed: grid.corpus.unlabeled_seed,
                labeled: false,
                id_prefix: "u".into(),
                ..Default::default()
            },
        )?),
    };
    let mut ctx = Context {
        grid,
        out,
        labeled,
        unlabeled,
        splits: BTreeMap::new(),
        embeddings: BTreeMap::new(),
    };

    let cells = grid.cells();
    let mut rows = Vec::with_capacity(cells.len());
    for cell in &cells {
        let hash = ctx.cell_hash(cell)?;
        let mut record = CellRecord::pending(cell, hash.clone());
        let cache = out.join("cells").join(format!("{hash}.json"));
        let cached = if cache.exists() {
            read_json::<CachedCell>(&cache)
                .ok()
                .filter(|c| out.join(&c.checkpoint).exists())
        } else {
            None
        };
        let result = match cached {
            Some(c) => {
                log::info!("[{}/{}] {} (cached)", cell.index + 1, cells.len(), record.label);
                Ok(c)
            }
            None => {
                log::info!("[{}/{}] {}", cell.index + 1, cells.len(), record.label);
                let r = ctx.run_cell(cell, &hash);
                if let Ok(c) = &r {
                    write_json_pretty(&cache, c)?;
                }
                r
            }
        };
        match result {
            Ok(c) => {
                record.status = CellStatus::Ok;
                record.dev_accuracy = Some(c.dev_accuracy);
                record.best_epoch = c.best_epoch;
                record.runtime_seconds = c.runtime_seconds;
                record.checkpoint = Some(c.checkpoint);
            }
            Err(e) => {
                log::warn!("cell {} failed: {e}", record.label);
                record.error = Some(e.to_string());
            }
        }
        rows.push(record);
    }

    let mut table = ResultTable::new(rows);
    let selected = table.select();
    for &i in selected.values() {
        match ctx.test_accuracy(&table.rows[i]) {
            Ok(acc) => table.rows[i].test_accuracy = Some(acc),
            Err(e) => {
                log::warn!("test scoring of {} failed: {e}", table.rows[i].label);
                table.rows[i].error = Some(format!("test scoring failed: {e}"));
            }
        }
        if table.rows[i].model == ModelKind::Nam {
            ctx.write_heatmap(&table.rows[i].clone())?;
        }
    }

    table.write_csv(out.join("results.csv"))?;
    table.write_jsonl(out.join("results.jsonl"))?;
    emit_comparison(&table, &grid.models).write(out)?;
    emit_trends(&table, out.join("trends"), grid.svg)?;
    Ok(table)
}
