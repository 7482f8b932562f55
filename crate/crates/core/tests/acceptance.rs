//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 4 to 7 train the default grid at three seeds (about ten minutes
//! on one core). `EAVNET_ACCEPTANCE_QUICK=1` skips them, `EAVNET_ACCEPTANCE_DIR`
//! keeps the grid outputs, and `EAVNET_ACCEPTANCE_STRICT=1` turns any FAIL
//! into a non-zero exit status.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::*;
use eavnet::attention::{attention_matrix, attention_vector, embedding_attention_vector, explain};
use eavnet::bow::{fit_idf, vectorize, BowClassifier, Scheme, Stopwords};
use eavnet::cnn::{load_checkpoint, CnnConfig, CnnModel, CnnParams};
use eavnet::corpus::{
    default_lexicon, locate_phrase, read_corpus, stratified_split, CorpusSplit, Document, TaskId, Vocabulary,
};
use eavnet::embeddings::{sgns_gradient, train_embeddings, W2vConfig};
use eavnet::harness::{run_grid, CorpusSettings, ExperimentGrid, GridInputs, ModelKind, ResultTable};
use eavnet::neural::{check_gradients, conv1d, Activation, ConvFilter, Matrix, Mode};
use rand::Rng;

const GRADIENT_TOLERANCE: f64 = 1e-4;
const GRADIENT_MIN_COORDS: usize = 200;
const GRADIENT_SECONDS: f64 = 10.0;
const ORACLE_INSTANCES: usize = 100;
const PRIMITIVE_TOLERANCE: f64 = 1e-12;
const MODEL_TOLERANCE: f64 = 1e-10;
const ORACLE_SECONDS: f64 = 30.0;
const SGNS_TOLERANCE: f64 = 1e-6;
const ZERO_LOSS_TOLERANCE: f64 = 1e-9;
/// Worst margin over the three calibration seeds (52.0 points) minus 2.
const NEGATION_MARGIN_POINTS: f64 = 50.0;
const NAM_MIN_ACCURACY: f64 = 0.90;
const LOCALIZATION_MIN_RATE: f64 = 0.80;
const TREND_ALLOWED_VIOLATIONS: usize = 1;
const SEEDS: [u64; 3] = [0, 1, 2];

struct Outcome {
    id: u8,
    name: &'static str,
    pass: Option<bool>,
    detail: String,
}

fn outcome(id: u8, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        name,
        pass: Some(pass),
        detail,
    }
}

fn gradient_integrity() -> Outcome {
    let t = Instant::now();
    let mut m = toy_model(true, true, 20, 11);
    for f in m.params.filters.iter_mut().flatten().chain(m.params.attention.iter_mut()) {
        f.bias = 0.3;
    }
    let mut r = rng(12);
    let batch: Vec<_> = (0..4).map(|i| (random_doc(&mut r, 12, 20), i % 3)).collect();
    let (_, grads) = m.loss_and_gradient(&batch).unwrap();
    let params = m.params.flatten(true);
    let analytic = grads.flatten(true);
    let pad_start = params.len() - m.params.embedding.as_slice().len();
    let coords: Vec<usize> = (0..params.len()).filter(|&c| c < pad_start || c >= pad_start + 8).collect();
    let mut probe = m.clone();
    let report = check_gradients(
        |p| {
            probe.params.assign(p, true).unwrap();
            probe.loss_and_gradient(&batch).unwrap().0
        },
        &params,
        &analytic,
        &coords,
        1e-5,
        GRADIENT_TOLERANCE,
    );
    let secs = t.elapsed().as_secs_f64();
    outcome(
        1,
        "gradient integrity",
        report.passed() && report.checked >= GRADIENT_MIN_COORDS && secs < GRADIENT_SECONDS,
        format!(
            "max relative error {:.2e} over {} coordinates (< {GRADIENT_TOLERANCE:e}), {secs:.2}s",
            report.max_relative_error, report.checked
        ),
    )
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let mut r = rng(21);
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut note = |k: &'static str, e: f64| {
        let w = worst.entry(k).or_insert(0.0);
        *w = w.max(e);
    };
    for _ in 0..ORACLE_INSTANCES {
        let n = r.gen_range(1..=20);
        let d = r.gen_range(1..=10);
        let s = random_matrix(&mut r, n, d);
        let a = if r.gen_bool(0.5) { Activation::Relu } else { Activation::Identity };
        let l = r.gen_range(1..=n);
        let f = random_filter(&mut r, l, d);
        note("conv1d", max_abs_diff(&conv1d(&s, &f, a).unwrap(), &naive_conv1d(&s, &f, a)));

        let m_a = r.gen_range(1..=4);
        let filters: Vec<ConvFilter> = (0..m_a).map(|_| random_filter(&mut r, 1, d)).collect();
        let sa = attention_matrix(&s, &filters, a).unwrap();
        let want = naive_attention_matrix(&s, &filters, a);
        let got: Vec<Vec<f64>> = (0..n).map(|i| sa.row(i).to_vec()).collect();
        note("attention_matrix", max_abs_diff(&got.concat(), &want.concat()));
        let (v_a, _) = attention_vector(&sa).unwrap();
        note("attention_vector", max_abs_diff(&v_a, &naive_row_max(&want)));
        let weights: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        note("eav", max_abs_diff(&embedding_attention_vector(&s, &weights).unwrap(), &naive_eav(&s, &weights)));

        let docs = r.gen_range(2..12);
        let corpus: Vec<Vec<String>> = (0..docs)
            .map(|_| {
                let len = r.gen_range(1..15);
                random_words(&mut r, len, 20)
            })
            .collect();
        let vocab = Vocabulary::build(corpus.iter(), 1).unwrap();
        let idf = fit_idf(&corpus, &vocab).unwrap();
        let len = r.gen_range(1..20);
        let doc = random_words(&mut r, len, 30);
        let v = vectorize(&doc, &vocab, Scheme::Tfidf, Some(&idf), &Stopwords::english()).unwrap();
        let got: BTreeMap<String, f64> = v.iter().map(|(i, x)| (vocab.token(i).unwrap().to_string(), x)).collect();
        let want = naive_tfidf(&doc, &corpus);
        // Sparse output may omit zero weights (words in every document).
        let err = got
            .keys()
            .chain(want.keys())
            .map(|k| (got.get(k).copied().unwrap_or(0.0) - want.get(k).copied().unwrap_or(0.0)).abs())
            .fold(0.0, f64::max);
        note("tfidf", err);

        let v = r.gen_range(3..30);
        let mut model = toy_model(r.gen_bool(0.5), false, v, r.gen());
        if r.gen_bool(0.5) {
            model.config.activation = Activation::Identity;
        }
        let docs: Vec<_> = (0..3).map(|_| random_doc(&mut r, 12, v)).collect();
        let batch = model.forward_many(&docs).unwrap();
        for (doc, pass) in docs.iter().zip(&batch) {
            let want = naive_logits(&model, doc);
            let single = model.forward(doc, Mode::Eval, &mut r).unwrap();
            note("cnn/nam forward", max_abs_diff(&single.logits, &want).max(max_abs_diff(&pass.logits, &want)));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let ok = worst.iter().all(|(k, &e)| {
        let tol = if matches!(*k, "tfidf" | "cnn/nam forward") { MODEL_TOLERANCE } else { PRIMITIVE_TOLERANCE };
        e <= tol
    }) && secs < ORACLE_SECONDS;
    let detail = worst.iter().map(|(k, e)| format!("{k} {e:.1e}")).collect::<Vec<_>>().join(", ");
    outcome(
        2,
        "oracle equivalence",
        ok,
        format!("{ORACLE_INSTANCES} instances each, max abs diff: {detail}; {secs:.2}s"),
    )
}

fn zero_pathway() -> Outcome {
    let mut r = rng(31);
    let v = 25;
    let mut nam = toy_model(true, false, v, 32);
    for f in nam.params.attention.iter_mut() {
        *f = ConvFilter::new(Matrix::zeros(1, 8), 0.0).unwrap();
    }
    let conv = nam.config.num_conv_features();
    for row in conv..nam.params.softmax_weights.rows() {
        nam.params.softmax_weights.row_mut(row).fill(0.0);
    }
    let plain_w = Matrix::from_vec(conv, 3, nam.params.softmax_weights.rows_slice(0, conv).to_vec()).unwrap();
    let plain = CnnModel::from_parts(
        CnnConfig {
            attention: None,
            ..nam.config.clone()
        },
        nam.vocab.clone(),
        CnnParams {
            attention: Vec::new(),
            softmax_weights: plain_w,
            ..nam.params.clone()
        },
    )
    .unwrap();
    let docs: Vec<_> = (0..100).map(|_| random_doc(&mut r, 12, v)).collect();
    let a = nam.forward_many(&docs).unwrap();
    let b = plain.forward_many(&docs).unwrap();
    let identical = a.iter().zip(&b).filter(|(x, y)| x.logits == y.logits).count();
    outcome(
        3,
        "zero-pathway equivalence",
        identical == docs.len(),
        format!("{identical}/{} documents with bit-identical logits", docs.len()),
    )
}

fn word2vec_sanity() -> Outcome {
    let mut r = rng(81);
    let (d, k) = (10, 5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p: Vec<f64> = (0..(2 + k) * d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let split = |p: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
            (
                p[..d].to_vec(),
                p[d..2 * d].to_vec(),
                p[2 * d..].chunks(d).map(<[f64]>::to_vec).collect(),
            )
        };
        let eval = |p: &[f64]| {
            let (u, v, negs) = split(p);
            let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
            sgns_gradient(&u, &v, &refs)
        };
        let g = eval(&p);
        let analytic: Vec<f64> = g.center.iter().chain(&g.context).chain(g.negatives.iter().flatten()).copied().collect();
        let coords: Vec<usize> = (0..p.len()).collect();
        let report = check_gradients(|q| eval(q).loss, &p, &analytic, &coords, 1e-5, SGNS_TOLERANCE);
        worst = worst.max(report.max_relative_error);
    }
    let z = vec![0.0; d];
    let zeros: Vec<&[f64]> = (0..k).map(|_| z.as_slice()).collect();
    let expected = (1 + k) as f64 * std::f64::consts::LN_2;
    let direct = (sgns_gradient(&z, &z, &zeros).loss - expected).abs();
    // Output vectors start at zero, so every first-step score is 0 and each
    // positive pair with its k negatives costs (1 + k) ln 2.
    let corpus: Vec<Vec<String>> = (0..200).map(|_| random_words(&mut r, 12, 15)).collect();
    let trained = train_embeddings(
        &corpus,
        &W2vConfig {
            dim: d,
            negatives: k,
            epochs: 1,
            initial_lr: Some(0.0),
            min_count: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let first_step = ((1 + k) as f64 * trained.epoch_losses[0] - expected).abs();
    outcome(
        8,
        "word2vec gradient and loss sanity",
        worst < SGNS_TOLERANCE && direct < ZERO_LOSS_TOLERANCE && first_step < ZERO_LOSS_TOLERANCE,
        format!(
            "sgns max relative error {worst:.1e} (< {SGNS_TOLERANCE:e}); zero-init loss error {direct:.1e}, \
             trainer first-step error {first_step:.1e} (< {ZERO_LOSS_TOLERANCE:e})"
        ),
    )
}

fn split_proportionality() -> Outcome {
    let task = TaskId::new(1).unwrap();
    let counts = [58usize, 940, 402];
    let mut docs = Vec::new();
    for (label, &c) in counts.iter().enumerate() {
        for i in 0..c {
            let labels = BTreeMap::from([(task, label as u8)]);
            docs.push(Document::from_tokens(format!("d{label}-{i}"), vec!["x".into()], labels).unwrap());
        }
    }
    let total: usize = counts.iter().sum();
    let sizes = [1000usize, 200, 200];
    let mut worst: f64 = 0.0;
    let mut exact_sizes = true;
    for seed in 0..10 {
        let split = stratified_split(&docs, task, (1000, 200, 200), seed).unwrap();
        for (part, &size) in [&split.train, &split.dev, &split.test].iter().zip(&sizes) {
            exact_sizes &= part.len() == size;
            for (label, &c) in counts.iter().enumerate() {
                let got = part.iter().filter(|d| d.label(task) == Some(label)).count() as f64;
                let quota = (c * size) as f64 / total as f64;
                worst = worst.max((got - quota).abs());
            }
        }
    }
    outcome(
        9,
        "stratified split proportionality",
        exact_sizes && worst <= 1.0,
        format!("58/940/402 into 1000/200/200 over 10 seeds: max |count - quota| {worst:.3} (<= 1)"),
    )
}

struct SeedRun {
    seed: u64,
    dir: PathBuf,
    table: ResultTable,
    split: CorpusSplit,
}

fn grid_for(seed: u64) -> ExperimentGrid {
    ExperimentGrid {
        seeds: vec![seed],
        corpus: CorpusSettings {
            labeled_seed: seed,
            unlabeled_seed: 1000 + seed,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn run_seed(root: &Path, seed: u64, name: &str) -> SeedRun {
    let dir = root.join(name);
    let grid = grid_for(seed);
    let t = Instant::now();
    let table = run_grid(&grid, &GridInputs::default(), &dir).unwrap();
    eprintln!("grid {name}: {} cells in {:.0}s", table.rows.len(), t.elapsed().as_secs_f64());
    let corpus = std::fs::read_dir(dir.join("corpora"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().starts_with("labeled-"))
        .unwrap();
    let docs = read_corpus(&corpus).unwrap();
    let split = stratified_split(&docs, grid.tasks[0], grid.corpus.split, seed).unwrap();
    SeedRun {
        seed,
        dir,
        table,
        split,
    }
}

fn negation_advantage(runs: &[SeedRun]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for run in runs {
        let task = run.split.task;
        let bow_row = run
            .table
            .rows
            .iter()
            .find(|r| r.task == task && r.model == ModelKind::BowLr && r.bow_scheme == Some(Scheme::Binary))
            .unwrap();
        let bow = BowClassifier::load(run.dir.join(bow_row.checkpoint.as_ref().unwrap())).unwrap();
        let bow_acc = bow.accuracy(&run.split.test).unwrap();
        let nam_acc = run.table.selected(task, ModelKind::Nam).and_then(|r| r.test_accuracy).unwrap_or(0.0);
        let margin = 100.0 * (nam_acc - bow_acc);
        ok &= margin >= NEGATION_MARGIN_POINTS && nam_acc >= NAM_MIN_ACCURACY;
        parts.push(format!("seed {}: NAM {nam_acc:.3} vs BOW-LR {bow_acc:.3} ({margin:+.1} pts)", run.seed));
    }
    outcome(
        4,
        "negation advantage",
        ok,
        format!(
            "{}; gate margin >= {NEGATION_MARGIN_POINTS} pts and NAM >= {NAM_MIN_ACCURACY}",
            parts.join("; ")
        ),
    )
}

fn attention_localization(runs: &[SeedRun]) -> Outcome {
    let lexicon = default_lexicon();
    let mut ok = true;
    let mut parts = Vec::new();
    for run in runs {
        let task = run.split.task;
        let row = run.table.selected(task, ModelKind::Nam).unwrap();
        let (model, _) = load_checkpoint(run.dir.join(row.checkpoint.as_ref().unwrap())).unwrap();
        let (mut hits, mut total) = (0usize, 0usize);
        for doc in &run.split.test {
            let tokens: Vec<String> = doc.tokens.iter().take(model.config.n).cloned().collect();
            let Some(m) = locate_phrase(&tokens, &lexicon[&task]).unwrap() else { continue };
            if m.negated {
                continue;
            }
            let e = explain(&model, &tokens).unwrap();
            if Some(e.predicted_label) != doc.label(task) {
                continue;
            }
            let mut finding = vec![false; tokens.len()];
            for lex in lexicon.values() {
                if let Some(p) = locate_phrase(&tokens, lex).unwrap() {
                    finding[p.start..p.end].iter_mut().for_each(|f| *f = true);
                }
            }
            let w = &e.normalized_weights;
            let trigger = (m.core_start..m.core_end).map(|i| w[i]).sum::<f64>() / (m.core_end - m.core_start) as f64;
            let bg: Vec<f64> = (0..tokens.len()).filter(|&i| !finding[i]).map(|i| w[i]).collect();
            let background = bg.iter().sum::<f64>() / bg.len().max(1) as f64;
            total += 1;
            if trigger > background {
                hits += 1;
            }
        }
        let rate = hits as f64 / total.max(1) as f64;
        ok &= total > 0 && rate >= LOCALIZATION_MIN_RATE;
        parts.push(format!("seed {}: {hits}/{total} ({:.0}%)", run.seed, 100.0 * rate));
    }
    outcome(
        5,
        "attention localization",
        ok,
        format!("{}; gate >= {:.0}% per seed", parts.join("; "), 100.0 * LOCALIZATION_MIN_RATE),
    )
}

fn embedding_trend(runs: &[SeedRun]) -> Outcome {
    let mut violations = 0;
    let mut parts = Vec::new();
    for run in runs {
        let mean = |size: usize| {
            let accs: Vec<f64> = run
                .table
                .rows
                .iter()
                .filter(|r| r.model == ModelKind::Cnn && r.w2v_corpus_size == Some(size))
                .filter_map(|r| r.dev_accuracy)
                .collect();
            accs.iter().sum::<f64>() / accs.len() as f64
        };
        let (small, large) = (mean(20_000), mean(40_000));
        if !(large >= small) {
            violations += 1;
        }
        parts.push(format!("seed {}: 20k {small:.3} -> 40k {large:.3}", run.seed));
    }
    outcome(
        6,
        "embedding-scale trend",
        violations <= TREND_ALLOWED_VIOLATIONS,
        format!(
            "CNN dev accuracy averaged over dims: {}; {violations} violation(s), {TREND_ALLOWED_VIOLATIONS} allowed",
            parts.join("; ")
        ),
    )
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn determinism(first: &SeedRun, second: &SeedRun) -> Outcome {
    let csv_a = std::fs::read(first.dir.join("results.csv")).unwrap();
    let csv_b = std::fs::read(second.dir.join("results.csv")).unwrap();
    let ckpt_a = files(&first.dir.join("checkpoints"));
    let ckpt_b = files(&second.dir.join("checkpoints"));
    let same_ckpt = ckpt_a.len() == ckpt_b.len() && ckpt_a == ckpt_b;
    outcome(
        7,
        "determinism",
        csv_a == csv_b && same_ckpt,
        format!(
            "results.csv identical: {}; {} checkpoint files identical: {}",
            csv_a == csv_b,
            ckpt_a.len(),
            same_ckpt
        ),
    )
}

fn skipped(id: u8, name: &'static str) -> Outcome {
    Outcome {
        id,
        name,
        pass: None,
        detail: "skipped (EAVNET_ACCEPTANCE_QUICK is set)".into(),
    }
}

fn main() {
    let quick = std::env::var_os("EAVNET_ACCEPTANCE_QUICK").is_some();
    let strict = std::env::var_os("EAVNET_ACCEPTANCE_STRICT").is_some();
    let mut results = vec![
        gradient_integrity(),
        oracle_equivalence(),
        zero_pathway(),
        word2vec_sanity(),
        split_proportionality(),
    ];
    if quick {
        for (id, name) in [
            (4, "negation advantage"),
            (5, "attention localization"),
            (6, "embedding-scale trend"),
            (7, "determinism"),
        ] {
            results.push(skipped(id, name));
        }
    } else {
        let keep = std::env::var_os("EAVNET_ACCEPTANCE_DIR").map(PathBuf::from);
        let tmp = tempfile::tempdir().unwrap();
        let root = keep.unwrap_or_else(|| tmp.path().to_path_buf());
        let runs: Vec<SeedRun> = SEEDS.iter().map(|&s| run_seed(&root, s, &format!("seed{s}"))).collect();
        let repeat = run_seed(&root, SEEDS[0], &format!("seed{}-repeat", SEEDS[0]));
        results.push(negation_advantage(&runs));
        results.push(attention_localization(&runs));
        results.push(embedding_trend(&runs));
        results.push(determinism(&runs[0], &repeat));
    }
    results.sort_by_key(|o| o.id);
    let mut failed = 0;
    for o in &results {
        let tag = match o.pass {
            Some(true) => "PASS",
            Some(false) => {
                failed += 1;
                "FAIL"
            }
            None => "SKIP",
        };
        println!("{tag} [{}] {}: {}", o.id, o.name, o.detail);
    }
    let passed = results.iter().filter(|o| o.pass == Some(true)).count();
    println!("acceptance: {passed} passed, {failed} failed, {} skipped", results.len() - passed - failed);
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
