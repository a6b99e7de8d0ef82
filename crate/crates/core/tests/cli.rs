mod common;

use std::fs;
use std::path::Path;

use argctx::cli::run_with;
use common::{LEXICONS, TABLE1};

fn run(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<String> = std::iter::once("argctx").chain(args.iter().copied()).map(String::from).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(&argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors() {
    let (code, _, err) = run(&[]);
    assert_eq!(code, 1);
    assert!(err.contains("Usage"), "{err}");

    let (code, _, err) = run(&["validate", "--corpus", TABLE1, "--bogus"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("ERROR[1]: "), "{err}");

    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("sweep"));
}

#[test]
fn validate_table1() {
    let (code, out, err) = run(&["validate", "--corpus", TABLE1]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["n_adus"], 5, "{v}");
    assert_eq!(v["n_speakers"], 2, "{v}");

    let (code, _, err) = run(&["validate", "--corpus", "/nonexistent/corpus.csv"]);
    assert_eq!(code, 2);
    assert!(err.starts_with("ERROR[2]: "), "{err}");
}

#[test]
fn featurize_writes_one_row_per_adu() {
    let dir = tempfile::tempdir().unwrap();
    let vectors = dir.path().join("vectors.txt");
    fs::write(&vectors, "opinion 1 2\nbecause 0.5 0.5\n").unwrap();
    let out = dir.path().join("features.csv");
    let (code, _, err) = run(&[
        "featurize",
        "--corpus",
        TABLE1,
        "--lexicons",
        LEXICONS,
        "--vectors",
        p(&vectors),
        "--out",
        p(&out),
    ]);
    assert_eq!(code, 2, "two-dim vectors must be rejected: {err}");

    let line: String = (0..100).map(|i| format!(" {}", i as f64 / 100.0)).collect();
    fs::write(&vectors, format!("opinion{line}\n")).unwrap();
    let (code, _, err) = run(&[
        "featurize",
        "--corpus",
        TABLE1,
        "--lexicons",
        LEXICONS,
        "--vectors",
        p(&vectors),
        "--out",
        p(&out),
    ]);
    assert_eq!(code, 0, "{err}");
    let mut r = csv::Reader::from_path(&out).unwrap();
    let header = r.headers().unwrap().clone();
    assert_eq!(&header[0], "discussion_id");
    assert_eq!(&header[4], "wv_0");
    assert_eq!(header.len(), 4 + 114);
    assert_eq!(r.records().count(), 5);
}

#[test]
fn synth_cv_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let synth_cfg = dir.path().join("synth.json");
    fs::write(&synth_cfg, r#"{"n_discussions": 4, "adus_per_discussion": 20, "vocab_size": 40}"#).unwrap();
    let data = dir.path().join("data");
    let (code, out, err) = run(&["synth", "--config", p(&synth_cfg), "--out", p(&data), "--seed", "9"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("80 ADUs"), "{out}");
    assert!(data.join("corpus.csv").exists() && data.join("vectors.txt").exists());

    let exp = dir.path().join("experiment.json");
    fs::write(
        &exp,
        r#"{
  "pipeline": "hybrid",
  "context": {"local_size": 1, "local_position": "prior", "speaker_size": 2},
  "training": {"epochs": 2, "seed": 4},
  "folds": 2,
  "encoder": {"filter_widths": [1], "filters_per_width": 4, "speaker_filters_per_width": 2},
  "paths": {"corpus": "data/corpus.csv", "vectors": "data/vectors.txt"}
}"#,
    )
    .unwrap();

    let cv_dir = dir.path().join("cv");
    let (code, out, err) = run(&["cv", "--config", p(&exp), "--out", p(&cv_dir), "--jobs", "2"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("kappa "), "{out}");
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(cv_dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["seed"], 4);
    assert_eq!(metrics["folds"].as_array().unwrap().len(), 2);

    let results = cv_dir.join("results.csv");
    let (code, first, err) = run(&["report", "--results", p(&results)]);
    assert_eq!(code, 0, "{err}");
    let (_, second, _) = run(&["report", "--results", p(&results)]);
    assert_eq!(first, second);
    assert!(first.starts_with("seed: 4"), "{first}");

    let train_dir = dir.path().join("train");
    let (code, _, err) = run(&["train", "--config", p(&exp), "--out", p(&train_dir)]);
    assert_eq!(code, 0, "{err}");
    let ck = argctx::neural::Checkpoint::load(&train_dir.join("model.ckpt")).unwrap();
    assert_eq!(ck.extra["seed"], 4);
    assert!(train_dir.join("training_log.json").exists());

    let (code, _, err) = run(&["cv", "--config", p(&exp), "--out", p(&cv_dir), "--jobs", "0"]);
    assert_eq!(code, 1, "{err}");
}
