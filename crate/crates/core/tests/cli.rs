use std::path::Path;
use std::process::{Command, Output};

fn eavnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eavnet"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = eavnet(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn gen_synthetic_writes_one_line_per_document() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["--seed", "3", "gen-synthetic", "--out", "c.jsonl"]);
    let text = std::fs::read_to_string(tmp.path().join("c.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 1400);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert!(first["labels"]["task2"].is_u64());

    ok(tmp.path(), &["--seed", "3", "gen-synthetic", "--out", "again.jsonl"]);
    assert_eq!(text, std::fs::read_to_string(tmp.path().join("again.jsonl")).unwrap());
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["gen-synthetic", "--docs", "100", "--out", "c.jsonl"]);
    let out = eavnet(tmp.path(), &["train", "--model", "cnn", "--corpus", "c.jsonl", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--embeddings is required"));
    assert_eq!(eavnet(tmp.path(), &["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(eavnet(tmp.path(), &["--help"]).status.code(), Some(0));

    let missing = eavnet(tmp.path(), &["evaluate", "--model", "nope.json", "--corpus", "c.jsonl"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn train_evaluate_and_explain_a_small_nam() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["gen-synthetic", "--docs", "350", "--out", "labeled.jsonl"]);
    ok(dir, &["gen-synthetic", "--docs", "1500", "--unlabeled", "--out", "unlabeled.jsonl"]);
    std::fs::write(dir.join("w2v.json"), r#"{"dim": 12, "epochs": 2}"#).unwrap();
    ok(dir, &["--config", "w2v.json", "train-embeddings", "--corpus", "unlabeled.jsonl", "--out", "emb.bin"]);
    std::fs::write(
        dir.join("train.json"),
        r#"{"split": [250, 50, 50], "cnn": {"filters_per_length": 6, "epochs": 2, "n": 80}}"#,
    )
    .unwrap();
    let stdout = ok(
        dir,
        &[
            "--config", "train.json", "train", "--model", "nam", "--corpus", "labeled.jsonl", "--embeddings", "emb.bin",
            "--out", "nam.json", "--am-num-filters", "4",
        ],
    );
    assert!(stdout.contains("test accuracy"));
    assert!(dir.join("nam.json.split.json").exists() && dir.join("nam.json.metrics.jsonl").exists());

    let eval = ok(
        dir,
        &["evaluate", "--model", "nam.json", "--corpus", "labeled.jsonl", "--manifest", "nam.json.split.json"],
    );
    let v: serde_json::Value = serde_json::from_str(&eval).unwrap();
    let acc = v["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("nam.json.split.json")).unwrap()).unwrap();
    let doc_id = manifest["test"][0].as_str().unwrap();
    ok(dir, &["explain", "--model", "nam.json", "--doc-id", doc_id, "--out", "h.html", "--json", "h.json"]);
    let html = std::fs::read_to_string(dir.join("h.html")).unwrap();
    assert!(html.starts_with("<!DOCTYPE html>") && html.contains("data-weight"));
    let export: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("h.json")).unwrap()).unwrap();
    assert_eq!(export["doc_id"], doc_id);
}

#[test]
fn grid_search_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("grid.json"),
        r#"{"models": ["BOW-LR", "BOW-SVM"], "corpus": {"labeled_docs": 700, "split": [500, 100, 100]}, "train_sizes": [500, 250]}"#,
    )
    .unwrap();
    let stdout = ok(dir, &["--config", "grid.json", "grid-search", "--out", "g"]);
    assert!(stdout.contains("8 cells, 0 failed"));
    ok(dir, &["report", "--results", "g", "--out", "r", "--svg"]);
    assert!(dir.join("r/comparison.csv").exists());
    assert!(dir.join("r/trends/bow-lr-train_size.svg").exists());
}
