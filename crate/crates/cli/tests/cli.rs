use std::path::Path;
use std::process::{Command, Output};

use ocnn_core::quantile::nu_quantile;
use serde_json::Value;

fn ocnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ocnn"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run ocnn")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ocnn(dir, args);
    assert!(
        out.status.success(),
        "ocnn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_data(dir: &Path) {
    ok(dir, &["synth", "--out", "d", "--dim", "16", "--n-normal", "60", "--n-anomalous", "6", "--seed", "3"]);
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_defaults_shape() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--out", "d"]);
    for (file, rows) in [("d/train.csv", 190), ("d/test.csv", 10)] {
        let text = std::fs::read_to_string(dir.path().join(file)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), rows + 1, "{file}");
        assert!(lines.iter().all(|l| l.split(',').count() == 513));
    }
}

#[test]
fn invalid_dim_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ocnn(dir.path(), &["synth", "--out", "d", "--dim", "0"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_an_io_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = ocnn(dir.path(), &["train", "--in", "nowhere.csv", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.csv"));
}

#[test]
fn bias_is_the_quantile_of_training_scores() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    small_data(p);
    ok(p, &["train", "--method", "ocnn", "--nu", "0.05", "--in", "d/train.csv", "--out", "m.json", "--max-iters", "5"]);
    ok(p, &["score", "--model", "m.json", "--in", "d/train.csv", "--out", "s.csv"]);
    let raw: Vec<f64> = column(&p.join("s.csv"), "raw").iter().map(|v| v.parse().unwrap()).collect();
    let doc = json(&p.join("m.json"));
    let r = doc["detector"]["r"].as_f64().unwrap();
    assert_eq!(doc["threshold"].as_f64().unwrap(), r);
    assert!((nu_quantile(&raw, 0.05).unwrap().r - r).abs() <= 1e-12);
    assert!(p.join("m.history.csv").exists());
}

#[test]
fn frozen_baseline_keeps_hidden_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    small_data(p);
    ok(p, &["train", "--method", "frozen-ocsvm", "--in", "d/train.csv", "--out", "m.json", "--max-iters", "3"]);
    assert_eq!(json(&p.join("m.json"))["detector"]["train_hidden"], Value::Bool(false));
}

#[test]
fn empty_input_scores_to_an_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    small_data(p);
    ok(p, &["train", "--method", "kde", "--in", "d/train.csv", "--out", "m.json"]);
    let header = std::fs::read_to_string(p.join("d/train.csv")).unwrap().lines().next().unwrap().to_string();
    std::fs::write(p.join("empty.csv"), header + "\n").unwrap();
    ok(p, &["score", "--model", "m.json", "--in", "empty.csv", "--out", "s.csv"]);
    let text = std::fs::read_to_string(p.join("s.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn nonnegative_decisions_are_normal() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    small_data(p);
    ok(p, &["train", "--method", "iforest", "--in", "d/train.csv", "--out", "m.json"]);
    ok(p, &["score", "--model", "m.json", "--in", "d/test.csv", "--out", "s.csv"]);
    let s = p.join("s.csv");
    for (d, pred) in column(&s, "decision").iter().zip(column(&s, "prediction")) {
        let d: f64 = d.parse().unwrap();
        assert_eq!(pred, if d >= 0.0 { "0" } else { "1" });
    }
}

#[test]
fn eval_of_perfect_scores() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("s.csv"),
        "raw,decision,prediction,label\n2,1,0,0\n3,2,0,0\n-1,-2,1,1\n",
    )
    .unwrap();
    ok(p, &["eval", "--in", "s.csv", "--out", "r.json", "--histogram", "h.csv"]);
    let report = json(&p.join("r.json"));
    assert_eq!(report["auc"].as_f64(), Some(1.0));
    assert_eq!(report["anomalies_all_negative"], Value::Bool(true));
    assert!(p.join("h.csv").exists());
}

#[test]
fn digest_follows_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("s.csv"), "raw,decision,prediction,label\n2,1,0,0\n-1,-2,1,1\n").unwrap();
    std::fs::write(p.join("a.toml"), "nu = 0.1\n").unwrap();
    std::fs::write(p.join("b.toml"), "nu = 0.2\n").unwrap();
    ok(p, &["eval", "--config", "a.toml", "--in", "s.csv", "--out", "a.json"]);
    ok(p, &["eval", "--config", "b.toml", "--in", "s.csv", "--out", "b.json"]);
    ok(p, &["eval", "--config", "a.toml", "--in", "s.csv", "--out", "c.json"]);
    let digest = |f: &str| json(&p.join(f))["config_digest"].as_str().unwrap().to_string();
    assert_ne!(digest("a.json"), digest("b.json"));
    assert_eq!(digest("a.json"), digest("c.json"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("c.toml"), "learning_rate = 0.1\n").unwrap();
    let out = ocnn(p, &["synth", "--config", "c.toml", "--out", "d"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn multi_seed_eval() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(
        p,
        &["eval", "--seeds", "0..2", "--method", "kde", "--dim", "8", "--n-normal", "40", "--out", "m.json"],
    );
    let doc = json(&p.join("m.json"));
    assert_eq!(doc["multi_seed"]["seeds"], serde_json::json!([0, 1, 2]));
    assert_eq!(doc["reports"].as_array().unwrap().len(), 3);
    assert_eq!(doc["orientation"], "-(log_density - t)");
}

#[test]
fn quantile_table_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = ocnn(dir.path(), &["paper-check"]);
    assert!(out.status.success());
    let tight = ocnn(dir.path(), &["paper-check", "--tol", "1e-6"]);
    assert_eq!(tight.status.code(), Some(1));
    let text = String::from_utf8(tight.stdout).unwrap();
    for r in ["r=3 ", "r=4 "] {
        assert!(text.lines().any(|l| l.starts_with(r) && l.ends_with("FAIL")), "{r}");
    }
}

#[test]
fn divergence_exits_4_and_keeps_history() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("x.csv"), "a\n1e100\n-1e100\n3e100\n").unwrap();
    std::fs::write(p.join("c.toml"), "activation = \"linear\"\nhidden = 1\nscale = \"none\"\nnu = 0.5\nlr = 1.0\n").unwrap();
    let out = ocnn(p, &["train", "--config", "c.toml", "--in", "x.csv", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!p.join("m.json").exists());
    let history = std::fs::read_to_string(p.join("m.history.csv")).unwrap();
    assert!(history.lines().count() >= 2);
}
