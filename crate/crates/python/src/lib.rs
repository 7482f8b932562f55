//! Python bindings: corpora, embeddings, bag-of-words baselines, the CNN and
//! NAM classifiers, attention explanations and the grid harness.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use eavnet::attention::{explain, AttentionConfig};
use eavnet::bow::{BowClassifier, Scheme, Stopwords};
use eavnet::cnn::{evaluate, fit_cnn, load_checkpoint, save_checkpoint, CnnConfig, CnnModel, EpochMetrics};
use eavnet::corpus::{generate_synthetic as gen, stratified_split as split, tokenize as tok, Document, SyntheticSpec, TaskId};
use eavnet::embeddings::{self, W2vConfig, W2vMode};
use eavnet::harness::{render_heatmap, run_grid as grid, ExperimentGrid, GridInputs, ModelKind};

fn to_py(e: eavnet::Error) -> PyErr {
    match e {
        eavnet::Error::InvalidArgument(_) | eavnet::Error::Shape(_) => PyValueError::new_err(e.to_string()),
        eavnet::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn task_id(task: u8) -> PyResult<TaskId> {
    TaskId::new(task).map_err(to_py)
}

/// Round-trips Python values through JSON, the corpus file's own format.
fn to_documents(py: Python<'_>, docs: &Bound<'_, PyAny>) -> PyResult<Vec<Document>> {
    let json = py.import("json")?;
    let mut out = Vec::new();
    for item in docs.try_iter()? {
        let line: String = json.call_method1("dumps", (item?,))?.extract()?;
        out.push(Document::from_json(&line).map_err(to_py)?);
    }
    Ok(out)
}

fn from_documents<'py>(py: Python<'py>, docs: &[Document]) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let json = py.import("json")?;
    docs.iter().map(|d| json.call_method1("loads", (d.to_json(),))).collect()
}

fn from_json_value<'py>(py: Python<'py>, text: String) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Tokenizes raw report text the way every model does.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    tok(text)
}

/// Synthetic radiology-style reports as `{"id", "text", "labels"}` dicts.
#[pyfunction]
#[pyo3(signature = (num_documents=1400, seed=0, labeled=true))]
fn generate_synthetic(py: Python<'_>, num_documents: usize, seed: u64, labeled: bool) -> PyResult<Vec<Bound<'_, PyAny>>> {
    let spec = SyntheticSpec {
        num_documents,
        seed,
        labeled,
        id_prefix: if labeled { "doc".into() } else { "u".into() },
        ..Default::default()
    };
    let corpus = gen(&spec).map_err(to_py)?;
    from_documents(py, &corpus.documents)
}

/// Label-stratified `(train, dev, test)` lists.
#[pyfunction]
#[pyo3(signature = (docs, task, sizes, seed=0))]
#[allow(clippy::type_complexity)]
fn stratified_split<'py>(
    py: Python<'py>,
    docs: &Bound<'py, PyAny>,
    task: u8,
    sizes: (usize, usize, usize),
    seed: u64,
) -> PyResult<(Vec<Bound<'py, PyAny>>, Vec<Bound<'py, PyAny>>, Vec<Bound<'py, PyAny>>)> {
    let docs = to_documents(py, docs)?;
    let s = split(&docs, task_id(task)?, sizes, seed).map_err(to_py)?;
    Ok((from_documents(py, &s.train)?, from_documents(py, &s.dev)?, from_documents(py, &s.test)?))
}

#[pyclass(name = "EmbeddingTable", module = "eavnet_py")]
struct PyEmbeddingTable {
    inner: embeddings::EmbeddingTable,
    epoch_losses: Vec<f64>,
}

#[pymethods]
impl PyEmbeddingTable {
    /// Trains word2vec with negative sampling on documents (dicts) or token lists.
    #[staticmethod]
    #[pyo3(signature = (corpus, dim=100, mode="SKIP", epochs=5, window=5, negatives=5, min_count=5, subsample_threshold=1e-4, seed=1))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        corpus: &Bound<'_, PyAny>,
        dim: usize,
        mode: &str,
        epochs: usize,
        window: usize,
        negatives: usize,
        min_count: u64,
        subsample_threshold: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let mut token_lists: Vec<Vec<String>> = Vec::new();
        let mut dict_items = Vec::new();
        for item in corpus.try_iter()? {
            let item = item?;
            if item.is_instance_of::<PyDict>() {
                dict_items.push(item);
            } else {
                token_lists.push(item.extract()?);
            }
        }
        if !dict_items.is_empty() {
            let list = pyo3::types::PyList::new(py, dict_items)?;
            token_lists.extend(to_documents(py, list.as_any())?.into_iter().map(|d| d.tokens));
        }
        let cfg = W2vConfig {
            dim,
            mode: mode.parse::<W2vMode>().map_err(to_py)?,
            epochs,
            window,
            negatives,
            min_count,
            subsample_threshold,
            seed,
            ..Default::default()
        };
        let trained = py
            .detach(|| embeddings::train_embeddings(&token_lists, &cfg))
            .map_err(to_py)?;
        Ok(PyEmbeddingTable {
            inner: trained.table,
            epoch_losses: trained.epoch_losses,
        })
    }

    /// Reads the text format for `.txt`/`.vec` paths, the binary format otherwise.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = match path.extension().and_then(|e| e.to_str()) {
            Some("txt") | Some("vec") => embeddings::read_text(&path),
            _ => embeddings::read_binary(&path),
        }
        .map_err(to_py)?;
        Ok(PyEmbeddingTable { inner, epoch_losses: Vec::new() })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") | Some("vec") => embeddings::write_text(&path, &self.inner),
            _ => embeddings::write_binary(&path, &self.inner),
        }
        .map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn epoch_losses(&self) -> Vec<f64> {
        self.epoch_losses.clone()
    }

    #[getter]
    fn vocabulary(&self) -> Vec<String> {
        self.inner.vocab().tokens().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn vector(&self, token: &str) -> PyResult<Vec<f32>> {
        self.inner
            .vector(token)
            .map(<[f32]>::to_vec)
            .ok_or_else(|| PyValueError::new_err(format!("{token:?} is not in the vocabulary")))
    }

    fn cosine(&self, a: &str, b: &str) -> PyResult<f64> {
        let index = |t: &str| {
            self.inner
                .vocab()
                .get(t)
                .ok_or_else(|| PyValueError::new_err(format!("{t:?} is not in the vocabulary")))
        };
        Ok(self.inner.cosine(index(a)?, index(b)?))
    }

    #[pyo3(signature = (token, top_k=10))]
    fn nearest_neighbors(&self, token: &str, top_k: usize) -> PyResult<Vec<(String, f64)>> {
        self.inner.nearest_neighbors(token, top_k).map_err(to_py)
    }
}

#[pyclass(name = "BowClassifier", module = "eavnet_py")]
struct PyBowClassifier {
    inner: BowClassifier,
}

#[pymethods]
impl PyBowClassifier {
    /// `model` is bow-lr, bow-svm or bow-rf; `scheme` is tf, tf-norm, binary or tfidf.
    #[staticmethod]
    #[pyo3(signature = (train, task, model="bow-lr", scheme="binary", seed=0))]
    fn fit(py: Python<'_>, train: &Bound<'_, PyAny>, task: u8, model: &str, scheme: &str, seed: u64) -> PyResult<Self> {
        let kind = model
            .parse::<ModelKind>()
            .map_err(to_py)?
            .bow_kind()
            .ok_or_else(|| PyValueError::new_err(format!("{model} is not a bag-of-words model")))?;
        let scheme = scheme.parse::<Scheme>().map_err(to_py)?;
        let docs = to_documents(py, train)?;
        let task = task_id(task)?;
        let inner = py
            .detach(|| BowClassifier::fit(&docs, task, kind, scheme, &Stopwords::english(), seed))
            .map_err(to_py)?;
        Ok(PyBowClassifier { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyBowClassifier { inner: BowClassifier::load(path).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    /// Predicted label for raw report text.
    fn predict(&self, text: &str) -> PyResult<usize> {
        Ok(self.inner.predict(&tok(text)).map_err(to_py)?.label)
    }

    fn accuracy(&self, py: Python<'_>, docs: &Bound<'_, PyAny>) -> PyResult<f64> {
        self.inner.accuracy(&to_documents(py, docs)?).map_err(to_py)
    }
}

#[pyclass(name = "CnnModel", module = "eavnet_py")]
struct PyCnnModel {
    inner: CnnModel,
    task: Option<TaskId>,
    metrics: Vec<EpochMetrics>,
    best_epoch: usize,
}

#[pymethods]
impl PyCnnModel {
    /// Trains a CNN, or a NAM when `attention_filters` is given, selecting
    /// the epoch with the best dev accuracy. `config` is an optional JSON
    /// object of further model settings.
    #[staticmethod]
    #[pyo3(signature = (embeddings, train, dev, task, attention_filters=None, n=200, epochs=20, lr=0.1, filters_per_length=64, seed=0, config=None))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        py: Python<'_>,
        embeddings: &PyEmbeddingTable,
        train: &Bound<'_, PyAny>,
        dev: &Bound<'_, PyAny>,
        task: u8,
        attention_filters: Option<usize>,
        n: usize,
        epochs: usize,
        lr: f64,
        filters_per_length: usize,
        seed: u64,
        config: Option<&str>,
    ) -> PyResult<Self> {
        let base: CnnConfig = match config {
            Some(c) => serde_json::from_str(c).map_err(json_err)?,
            None => CnnConfig::default(),
        };
        let cfg = CnnConfig {
            n,
            epochs,
            lr,
            filters_per_length,
            seed,
            attention: attention_filters.map(|m| AttentionConfig { num_filters: m, ..Default::default() }),
            ..base
        };
        let (train, dev, task) = (to_documents(py, train)?, to_documents(py, dev)?, task_id(task)?);
        let table = &embeddings.inner;
        let outcome = py.detach(|| fit_cnn(cfg, table, &train, &dev, task)).map_err(to_py)?;
        Ok(PyCnnModel {
            inner: outcome.model,
            task: Some(task),
            metrics: outcome.metrics,
            best_epoch: outcome.best_epoch,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (inner, task) = load_checkpoint(path).map_err(to_py)?;
        Ok(PyCnnModel { inner, task, metrics: Vec::new(), best_epoch: 0 })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(path, &self.inner, self.task).map_err(to_py)
    }

    #[getter]
    fn has_attention(&self) -> bool {
        self.inner.has_attention()
    }

    #[getter]
    fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    #[getter]
    fn task(&self) -> Option<u8> {
        self.task.map(TaskId::get)
    }

    /// Per-epoch `{epoch, train_loss, train_acc, dev_acc}` records.
    #[getter]
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        from_json_value(py, serde_json::to_string(&self.metrics).map_err(json_err)?)
    }

    /// Predicted label for raw report text.
    fn predict(&self, text: &str) -> PyResult<usize> {
        self.inner.predict(&tok(text)).map_err(to_py)
    }

    /// `{accuracy, confusion, predictions}` on labeled documents.
    #[pyo3(signature = (docs, task=None))]
    fn evaluate<'py>(&self, py: Python<'py>, docs: &Bound<'py, PyAny>, task: Option<u8>) -> PyResult<Bound<'py, PyAny>> {
        let task = match task {
            Some(t) => task_id(t)?,
            None => self.task.ok_or_else(|| PyValueError::new_err("task is required"))?,
        };
        let eval = evaluate(&self.inner, &to_documents(py, docs)?, task).map_err(to_py)?;
        from_json_value(py, serde_json::to_string(&eval).map_err(json_err)?)
    }

    /// Attention weights for raw report text (NAM only).
    fn explain<'py>(&self, py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
        let e = explain(&self.inner, &tok(text)).map_err(to_py)?;
        from_json_value(py, serde_json::to_string(&e).map_err(json_err)?)
    }

    /// Self-contained HTML heatmap of the attention weights (NAM only).
    fn heatmap_html(&self, text: &str) -> PyResult<String> {
        let e = explain(&self.inner, &tok(text)).map_err(to_py)?;
        Ok(render_heatmap(&e, self.task))
    }
}

/// Runs an experiment grid. `config` is the grid as a JSON string; omitted
/// fields take the desk-scale defaults. Returns the result rows as dicts.
#[pyfunction]
#[pyo3(signature = (out_dir, config=None, labeled=None, unlabeled=None))]
fn run_grid<'py>(
    py: Python<'py>,
    out_dir: PathBuf,
    config: Option<&str>,
    labeled: Option<PathBuf>,
    unlabeled: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let g: ExperimentGrid = match config {
        Some(c) => serde_json::from_str(c).map_err(json_err)?,
        None => ExperimentGrid::default(),
    };
    let inputs = GridInputs { labeled, unlabeled };
    let table = py.detach(|| grid(&g, &inputs, &out_dir)).map_err(to_py)?;
    from_json_value(py, serde_json::to_string(&table.rows).map_err(json_err)?)
}

#[pymodule]
fn eavnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_split, m)?)?;
    m.add_function(wrap_pyfunction!(run_grid, m)?)?;
    m.add_class::<PyEmbeddingTable>()?;
    m.add_class::<PyBowClassifier>()?;
    m.add_class::<PyCnnModel>()?;
    Ok(())
}
