mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use common::*;
use rlink::cli::{read_predictions, run, write_predictions};
use rlink::dataset::{parse_dataset, save_dataset, ParseOptions};
use rlink::metrics::MetricReport;

fn run_cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut full = vec!["rlink"];
    full.extend_from_slice(args);
    let code = run(full, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Files {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Files {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Files { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

fn text_data(files: &Files) -> (PathBuf, PathBuf) {
    let g = TopicText::new(300, 4, 5, 40, 21, 0.4, 0.6, 0.02);
    let (train, test) = (files.path("train.svm"), files.path("test.svm"));
    save_dataset(&g.sample(200, 22), &train).unwrap();
    save_dataset(&g.sample(100, 23), &test).unwrap();
    (train, test)
}

fn reports(stdout: &str) -> Vec<MetricReport> {
    stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn eval_with_truth_as_prediction_is_perfect() {
    let files = Files::new();
    let (_, test) = text_data(&files);
    let ds = parse_dataset(&test, &ParseOptions::default()).unwrap();
    let pred = files.path("truth.pred");
    write_predictions(&ds.label_sets(), std::fs::File::create(&pred).unwrap()).unwrap();
    let (code, out) = run_cli(&["eval", "--test", s(&test), "--pred", s(&pred), "--metric", "hamming", "--bootstrap", "200"]);
    assert_eq!(code, 0);
    let r = reports(&out);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].metric, "hamming");
    assert_eq!((r[0].point_estimate, r[0].ci_low, r[0].ci_high), (0.0, 0.0, 0.0));
    assert_eq!(r[0].n_bootstrap, 200);
}

#[test]
fn train_predict_eval_round_trip() {
    let files = Files::new();
    let (train, test) = text_data(&files);
    let model = files.path("m.rlnk");
    let args = [
        "train", "--train", s(&train), "--model", s(&model), "--rank", "4", "--oversample", "8",
        "--features", "64", "--passes", "2", "--lr", "0.05", "--seed", "3",
    ];
    assert_eq!(run_cli(&args).0, 0);
    let first = std::fs::read(&model).unwrap();
    assert_eq!(run_cli(&args).0, 0);
    assert_eq!(std::fs::read(&model).unwrap(), first, "model files differ between identical runs");

    let pred = files.path("out.pred");
    let (code, _) = run_cli(&["predict", "--model", s(&model), "--test", s(&test), "--out", s(&pred), "--inference", "f1"]);
    assert_eq!(code, 0);
    assert_eq!(read_predictions(&pred).unwrap().len(), 100);

    let (code, out) = run_cli(&[
        "eval", "--test", s(&test), "--model", s(&model), "--metric", "hamming", "--metric", "macrof1",
        "--metric", "p@2", "--bootstrap", "100", "--seed", "5",
    ]);
    assert_eq!(code, 0);
    let r = reports(&out);
    assert_eq!(r.iter().map(|r| r.metric.as_str()).collect::<Vec<_>>(), ["hamming", "macrof1", "p@2"]);
    for rep in &r {
        assert!(rep.ci_low <= rep.point_estimate && rep.point_estimate <= rep.ci_high);
        assert_eq!(rep.ci_level, 0.9);
    }
}

#[test]
fn embed_reports_spectrum_and_variance() {
    let files = Files::new();
    let (train, _) = text_data(&files);
    let out_path = files.path("e.rlnk");
    let (code, out) = run_cli(&[
        "embed", "--train", s(&train), "--out", s(&out_path), "--rank", "3", "--oversample", "5", "--exact",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["rank"], 3);
    assert_eq!(v["sigma"].as_array().unwrap().len(), 3);
    let proxy = v["captured_variance_fraction"].as_f64().unwrap();
    let exact = v["exact_captured_variance"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&proxy) && (0.0..=1.0).contains(&exact));
    assert!(exact <= proxy + 1e-12, "proxy {proxy} exact {exact}");
    assert!(out_path.exists());
}

#[test]
fn split_writes_both_parts() {
    let files = Files::new();
    let (train, _) = text_data(&files);
    let (a, b) = (files.path("a.svm"), files.path("b.svm"));
    let (code, _) = run_cli(&["split", "--data", s(&train), "--train-out", s(&a), "--test-out", s(&b), "--seed", "2"]);
    assert_eq!(code, 0);
    let opts = ParseOptions::default();
    let (da, db) = (parse_dataset(&a, &opts).unwrap(), parse_dataset(&b, &opts).unwrap());
    assert_eq!((da.n_examples(), db.n_examples()), (150, 50));
}

#[test]
fn learned_embedding_beats_random_through_cli() {
    let files = Files::new();
    let g = BlockMulticlass::new(300, 200, 10, 1000, 1.0, 0.3, 3.0, 0.8);
    let (train, test) = (files.path("tr.svm"), files.path("te.svm"));
    save_dataset(&g.sample(3000, 2000), &train).unwrap();
    save_dataset(&g.sample(2000, 3000), &test).unwrap();
    let mut errors = Vec::new();
    for mode in ["learned", "random"] {
        let model = files.path(&format!("{mode}.rlnk"));
        let (code, _) = run_cli(&[
            "train", "--train", s(&train), "--model", s(&model), "--embedding", mode, "--kernel", "linear",
            "--loss", "logistic", "--passes", "3",
        ]);
        assert_eq!(code, 0);
        let (code, out) = run_cli(&["eval", "--test", s(&test), "--model", s(&model), "--metric", "error", "--bootstrap", "100"]);
        assert_eq!(code, 0);
        errors.push(reports(&out)[0].point_estimate);
    }
    assert!(errors[0] < errors[1], "learned {} random {}", errors[0], errors[1]);
}

#[test]
fn failures_map_to_exit_codes() {
    let files = Files::new();
    let (train, test) = text_data(&files);
    let model = files.path("m.rlnk");
    // usage and configuration
    assert_eq!(run_cli(&["train"]).0, 1);
    assert_eq!(run_cli(&["eval", "--test", s(&test), "--pred", "x", "--metric", "bogus"]).0, 1);
    assert_eq!(run_cli(&["train", "--train", s(&train), "--model", s(&model), "--kernel", "sinc"]).0, 1);
    assert_eq!(run_cli(&["train", "--train", s(&train), "--model", s(&model), "--rank", "0"]).0, 1);
    // data
    assert_eq!(run_cli(&["train", "--train", s(&files.path("missing.svm")), "--model", s(&model)]).0, 2);
    let junk = files.path("junk.rlnk");
    std::fs::write(&junk, b"RLNK\x01\x00\x00\x00").unwrap();
    let out = files.path("o.pred");
    assert_eq!(run_cli(&["predict", "--model", s(&junk), "--test", s(&test), "--out", s(&out)]).0, 2);
    // numerical: runaway learning rate
    let code = run_cli(&[
        "train", "--train", s(&train), "--model", s(&model), "--rank", "4", "--oversample", "8",
        "--loss", "squared", "--lr", "1e6", "--passes", "3", "--features", "64",
    ])
    .0;
    assert_eq!(code, 3);
    assert!(!model.exists());
    // help is not an error
    assert_eq!(run_cli(&["--help"]).0, 0);
}

#[test]
fn binary_exits_with_documented_codes() {
    let exe = env!("CARGO_BIN_EXE_rlink");
    let status = Command::new(exe).arg("--version").output().unwrap();
    assert!(status.status.success());
    let missing = Command::new(exe)
        .args(["eval", "--test", "/nonexistent/t.svm", "--pred", "/nonexistent/p", "--metric", "hamming"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error"));
}
