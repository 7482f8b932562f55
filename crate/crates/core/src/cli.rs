//! The `eavnet` command line.
//!
//! Every subcommand accepts `--seed` and `--config <file>`; the config file
//! is JSON for that subcommand's settings and explicit flags override it.
//! Exit status is 0 on success, 1 on usage errors and 2 on data errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::attention::{explain, write_explanation, AttentionConfig, ExplanationExport};
use crate::bow::{BowClassifier, ForestConfig, LinearConfig, Scheme, Stopwords};
use crate::cnn::{evaluate, fit_cnn, load_checkpoint, write_metrics, CnnCheckpoint, CnnConfig, Evaluation};
use crate::corpus::{
    generate_synthetic, read_corpus, read_manifest, stratified_split, write_corpus, write_manifest, Document, SplitManifest,
    SyntheticSpec, TaskId, Vocabulary,
};
use crate::embeddings::{read_binary, read_text, train_embeddings, write_binary, write_text, EmbeddingTable, W2vConfig, W2vMode};
use crate::harness::{emit_comparison, emit_heatmap, emit_trends, run_grid, ExperimentGrid, GridInputs, ModelKind, ResultTable};
use crate::util::{read_json, write_json_pretty};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "eavnet", version, about = "Radiology report classification with CNNs and embedding attention")]
struct Cli {
    /// Random seed; overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON settings for the subcommand; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic labeled (or unlabeled) corpus as JSON Lines.
    GenSynthetic {
        #[arg(long)]
        docs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Omit labels, for embedding training.
        #[arg(long)]
        unlabeled: bool,
        #[arg(long)]
        id_prefix: Option<String>,
    },
    /// Build a vocabulary from a corpus.
    BuildVocab {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        min_count: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train word2vec embeddings on a corpus.
    TrainEmbeddings {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mode: Option<W2vMode>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        negatives: Option<usize>,
        #[arg(long)]
        min_count: Option<u64>,
        /// Use only the first N documents.
        #[arg(long)]
        docs: Option<usize>,
        /// `text` or `binary`; inferred from the extension by default.
        #[arg(long)]
        format: Option<String>,
    },
    /// Train one model on a labeled corpus.
    Train {
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        task: Option<u8>,
        /// Embedding file; required for cnn and nam.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Bag-of-words weighting: tf, tf-norm, binary or tfidf.
        #[arg(long)]
        scheme: Option<Scheme>,
        /// Train/dev/test sizes, e.g. `1000,200,200`.
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        am_num_filters: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Document length in tokens.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run an experiment grid.
    GridSearch {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        labeled: Option<PathBuf>,
        #[arg(long)]
        unlabeled: Option<PathBuf>,
    },
    /// Score a checkpoint on a corpus.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        task: Option<u8>,
        /// Restrict to one split of a manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// `train`, `dev` or `test`.
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a NAM attention heatmap for one document.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        doc_id: String,
        /// Defaults to the corpus recorded in the checkpoint.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// HTML heatmap path.
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-token weights as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Rebuild comparison tables and trend files from a grid's results.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
}

/// Settings for `build-vocab`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct VocabSettings {
    min_count: u64,
}

impl Default for VocabSettings {
    fn default() -> Self {
        VocabSettings { min_count: 1 }
    }
}

/// Settings for `train`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct TrainSettings {
    task: u8,
    scheme: Scheme,
    /// `None` splits 5:1:1.
    split: Option<(usize, usize, usize)>,
    seed: u64,
    cnn: CnnConfig,
    linear: LinearConfig,
    forest: ForestConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            task: 2,
            scheme: Scheme::Binary,
            split: None,
            seed: 0,
            cnn: CnnConfig { n: 200, lr: 0.1, ..CnnConfig::default() },
            linear: LinearConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

/// Settings for `evaluate` and `explain`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ScoreSettings {
    task: Option<u8>,
}

/// Settings for `report`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ReportSettings {
    svg: bool,
    models: Option<Vec<ModelKind>>,
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidArgument(format!("invalid config {}: {e}", p.display())))
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn task_id(t: u8) -> Result<TaskId> {
    TaskId::new(t)
}

fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("txt") | Some("vec") => read_text(path),
        _ => read_binary(path),
    }
}

fn parse_split(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidArgument(format!("--split expects three comma-separated counts, got {s:?}")))?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(Error::InvalidArgument(format!("--split expects three counts, got {s:?}"))),
    }
}

fn default_split(n: usize) -> (usize, usize, usize) {
    let dev = n / 7;
    (n - 2 * dev, dev, dev)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    use std::io::Write;
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::GenSynthetic { docs, out, unlabeled, id_prefix } => {
            let mut spec: SyntheticSpec = load_config(config)?;
            if let Some(d) = docs {
                spec.num_documents = d;
            }
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            if unlabeled {
                spec.labeled = false;
            }
            if let Some(p) = id_prefix {
                spec.id_prefix = p;
            }
            let corpus = generate_synthetic(&spec)?;
            write_corpus(&out, &corpus.documents)?;
            println!("wrote {} documents to {}", corpus.documents.len(), out.display());
            Ok(())
        }
        Command::BuildVocab { corpus, min_count, out } => {
            let mut s: VocabSettings = load_config(config)?;
            if let Some(m) = min_count {
                s.min_count = m;
            }
            let docs = read_corpus(&corpus)?;
            let vocab = Vocabulary::build(docs.iter().map(|d| d.tokens.as_slice()), s.min_count)?;
            write_json_pretty(&out, &vocab)?;
            println!("wrote {} entries to {}", vocab.len(), out.display());
            Ok(())
        }
        Command::TrainEmbeddings { corpus, out, mode, dim, epochs, window, negatives, min_count, docs, format } => {
            let mut cfg: W2vConfig = load_config(config)?;
            if let Some(m) = mode {
                cfg.mode = m;
            }
            cfg.dim = dim.unwrap_or(cfg.dim);
            cfg.epochs = epochs.unwrap_or(cfg.epochs);
            cfg.window = window.unwrap_or(cfg.window);
            cfg.negatives = negatives.unwrap_or(cfg.negatives);
            cfg.min_count = min_count.unwrap_or(cfg.min_count);
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            let text = match format.as_deref() {
                Some("text") => true,
                Some("binary") => false,
                Some(f) => return Err(Error::InvalidArgument(format!("--format must be text or binary, got {f:?}"))),
                None => matches!(out.extension().and_then(|e| e.to_str()), Some("txt") | Some("vec")),
            };
            let all = read_corpus(&corpus)?;
            let take = docs.unwrap_or(all.len()).min(all.len());
            let tokens: Vec<&[String]> = all[..take].iter().map(|d| d.tokens.as_slice()).collect();
            let trained = train_embeddings(&tokens, &cfg)?;
            if text {
                write_text(&out, &trained.table)?;
            } else {
                write_binary(&out, &trained.table)?;
            }
            println!(
                "trained {} vectors of dimension {} on {} documents; epoch losses {:?}",
                trained.table.len(),
                trained.table.dim(),
                take,
                trained.epoch_losses
            );
            Ok(())
        }
        Command::Train { model, corpus, task, embeddings, out, scheme, split, am_num_filters, epochs, lr, n } => {
            let mut s: TrainSettings = load_config(config)?;
            if model.is_neural() && embeddings.is_none() {
                return Err(Error::InvalidArgument(format!("--embeddings is required for --model {}", model.name().to_lowercase())));
            }
            s.task = task.unwrap_or(s.task);
            s.scheme = scheme.unwrap_or(s.scheme);
            s.seed = cli.seed.unwrap_or(s.seed);
            if let Some(sp) = split {
                s.split = Some(parse_split(&sp)?);
            }
            let task = task_id(s.task)?;
            let docs = read_corpus(&corpus)?;
            let sizes = s.split.unwrap_or_else(|| default_split(docs.len()));
            let split = stratified_split(&docs, task, sizes, s.seed)?;
            write_manifest(&sibling(&out, ".split.json"), &SplitManifest::from_split(&split, s.seed))?;
            if let Some(kind) = model.bow_kind() {
                let linear = LinearConfig { seed: s.seed, ..s.linear };
                let forest = ForestConfig { seed: s.seed, ..s.forest };
                let clf = BowClassifier::fit_with(&split.train, task, kind, s.scheme, &Stopwords::english(), &linear, &forest)?;
                clf.save(&out)?;
                let dev = clf.accuracy(&split.dev)?;
                let test = clf.accuracy(&split.test)?;
                println!("{model} ({}) dev accuracy {dev:.4}, test accuracy {test:.4}", s.scheme.name());
            } else {
                let table = read_embeddings(embeddings.as_deref().expect("checked above"))?;
                let mut cfg = s.cnn;
                cfg.seed = s.seed;
                cfg.epochs = epochs.unwrap_or(cfg.epochs);
                cfg.lr = lr.unwrap_or(cfg.lr);
                cfg.n = n.unwrap_or(cfg.n);
                cfg.attention = match model {
                    ModelKind::Nam => {
                        let base = cfg.attention.unwrap_or_default();
                        Some(AttentionConfig { num_filters: am_num_filters.unwrap_or(base.num_filters), ..base })
                    }
                    _ => None,
                };
                let outcome = fit_cnn(cfg, &table, &split.train, &split.dev, task)?;
                let mut ckpt = CnnCheckpoint::from_model(&outcome.model, Some(task));
                ckpt.source_corpus = Some(corpus.display().to_string());
                write_json_pretty(&out, &ckpt)?;
                write_metrics(sibling(&out, ".metrics.jsonl"), &outcome.metrics)?;
                let test = evaluate(&outcome.model, &split.test, task)?;
                println!(
                    "{model} best epoch {}: dev accuracy {:.4}, test accuracy {:.4}",
                    outcome.best_epoch, outcome.best_dev_accuracy, test.accuracy
                );
            }
            Ok(())
        }
        Command::GridSearch { out, labeled, unlabeled } => {
            let mut grid: ExperimentGrid = load_config(config)?;
            if let Some(s) = cli.seed {
                grid.seeds = vec![s];
            }
            let table = run_grid(&grid, &GridInputs { labeled, unlabeled }, &out)?;
            let failed = table.rows.iter().filter(|r| !r.is_ok()).count();
            print!("{}", emit_comparison(&table, &grid.models).to_text());
            println!("{} cells, {failed} failed; results in {}", table.rows.len(), out.display());
            Ok(())
        }
        Command::Evaluate { model, corpus, task, manifest, split, out } => {
            let s: ScoreSettings = load_config(config)?;
            let mut docs = read_corpus(&corpus)?;
            if let Some(m) = manifest {
                let parts = read_manifest(&m)?.apply(&docs)?;
                docs = match split.as_str() {
                    "train" => parts.train,
                    "dev" => parts.dev,
                    "test" => parts.test,
                    other => return Err(Error::InvalidArgument(format!("--split must be train, dev or test, got {other:?}"))),
                };
            }
            let eval = evaluate_checkpoint(&model, &docs, task.or(s.task))?;
            match out {
                Some(p) => write_json_pretty(&p, &eval)?,
                None => print_json(&eval)?,
            }
            Ok(())
        }
        Command::Explain { model, doc_id, corpus, out, json } => {
            let s: ScoreSettings = load_config(config)?;
            let ckpt: CnnCheckpoint = read_json(&model)?;
            let corpus = corpus.or_else(|| ckpt.source_corpus.clone().map(PathBuf::from)).ok_or_else(|| {
                Error::InvalidArgument("--corpus is required: the checkpoint records no source corpus".into())
            })?;
            let recorded_task = ckpt.task;
            let nam = ckpt.into_model()?;
            let task = match s.task {
                Some(t) => Some(task_id(t)?),
                None => recorded_task,
            };
            let docs = read_corpus(&corpus)?;
            let doc = docs
                .iter()
                .find(|d| d.id == doc_id)
                .ok_or_else(|| Error::Data(format!("document {doc_id} not found in {}", corpus.display())))?;
            let e = explain(&nam, &doc.tokens)?;
            emit_heatmap(&e, task, &out)?;
            if let Some(j) = json {
                write_explanation(&j, &ExplanationExport::new(&doc_id, task, &e))?;
            }
            println!("predicted label {} for {doc_id}; heatmap written to {}", e.predicted_label, out.display());
            Ok(())
        }
        Command::Report { results, out, svg } => {
            let s: ReportSettings = load_config(config)?;
            let table = ResultTable::read_jsonl(results.join("results.jsonl"))?;
            let out = out.unwrap_or(results);
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let models = s.models.unwrap_or_else(|| table.models());
            let comparison = emit_comparison(&table, &models);
            comparison.write(&out)?;
            let trends = emit_trends(&table, out.join("trends"), svg || s.svg)?;
            print!("{}", comparison.to_text());
            for n in trends.notices {
                println!("note: {n}");
            }
            Ok(())
        }
    }
}

#[derive(Debug, Serialize)]
struct EvaluationReport {
    model: String,
    task: TaskId,
    documents: usize,
    #[serde(flatten)]
    evaluation: Evaluation,
}

/// Scores either kind of checkpoint; the file's fields decide which.
fn evaluate_checkpoint(path: &Path, docs: &[Document], task: Option<u8>) -> Result<EvaluationReport> {
    let value: serde_json::Value = read_json(path)?;
    let task_override = task.map(task_id).transpose()?;
    if value.get("model_kind").is_some() {
        let (model, recorded) = load_checkpoint(path)?;
        let task = task_override
            .or(recorded)
            .ok_or_else(|| Error::InvalidArgument("--task is required: the checkpoint records no task".into()))?;
        Ok(EvaluationReport {
            model: if model.has_attention() { "NAM" } else { "CNN" }.into(),
            task,
            documents: docs.len(),
            evaluation: evaluate(&model, docs, task)?,
        })
    } else {
        let clf = BowClassifier::load(path)?;
        let task = task_override.unwrap_or(clf.task);
        if task != clf.task {
            return Err(Error::InvalidArgument(format!("checkpoint was trained for {} not {task}", clf.task)));
        }
        let gold = docs.iter().map(|d| d.require_label(task)).collect::<Result<Vec<_>>>()?;
        let predicted = docs.iter().map(|d| Ok(clf.predict(&d.tokens)?.label)).collect::<Result<Vec<_>>>()?;
        Ok(EvaluationReport {
            model: clf.kind.name().into(),
            task,
            documents: docs.len(),
            evaluation: Evaluation::from_predictions(&gold, &predicted, crate::corpus::NUM_CLASSES)?,
        })
    }
}
