use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lfext(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfext")).args(args).current_dir(cwd).output().expect("spawn lfext")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    assert_eq!(text.lines().count(), 1, "stderr: {text}");
    serde_json::from_str(text.trim()).expect("stderr is one JSON line")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn synth(dir: &Path, n: &str) {
    let out = lfext(&["synth", "--n", n, "--seed", "3", "--out", "task"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

const TASK: [&str; 6] = ["--embeddings", "task/embeddings.emb", "--votes", "task/votes.csv", "--distance", "euclidean"];

fn pipeline(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["pipeline"];
    args.extend(TASK);
    args.extend(["--dev-labels", "task/dev_labels.csv", "--gold", "task/labels.csv", "--out", out]);
    args.extend(extra);
    lfext(&args, dir)
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = lfext(&["--help"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("pipeline"));
}

#[test]
fn bad_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lfext(&["extend", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "usage");
    assert_eq!(stderr_json(&out)["exit_code"], 1);
}

#[test]
fn missing_input_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lfext(&["fit", "--votes", "absent.csv", "--prior", "0.5", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "data");
}

#[test]
fn malformed_votes_are_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("v.csv"), "1,0,1\n1,5,0\n").unwrap();
    let out = lfext(&["fit", "--votes", "v.csv", "--prior", "0.5", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("row 1"));
}

#[test]
fn degenerate_fit_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    // sources 1 and 2 never vote on the same row
    fs::write(dir.path().join("v.csv"), "1,1,0\n-1,-1,0\n1,0,1\n-1,0,-1\n").unwrap();
    let out = lfext(&["fit", "--votes", "v.csv", "--prior", "0.5", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stderr_json(&out)["error"], "numeric");
}

#[test]
fn fit_without_prior_says_what_is_missing() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("v.csv"), "1,1,1\n-1,-1,-1\n").unwrap();
    let out = lfext(&["fit", "--votes", "v.csv", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["message"], "class balance prior required (--prior or --dev-labels)");
}

#[test]
fn similarity_thresholds_become_radii() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "600");
    let mut a = vec!["extend"];
    a.extend(TASK);
    a.extend(["--similarity-thresholds", "0.75,0.5,1", "--out", "a"]);
    assert!(lfext(&a, dir.path()).status.success());
    let radii: Vec<f64> = json(&dir.path().join("a/extension_report.json"))["sources"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["radius"].as_f64().unwrap())
        .collect();
    assert_eq!(radii, vec![0.25, 0.5, 0.0]);

    let mut b = vec!["extend"];
    b.extend(TASK);
    b.extend(["--radii", "0.75,0.5,1", "--threshold-as-similarity", "--out", "b"]);
    assert!(lfext(&b, dir.path()).status.success());
    assert_eq!(fs::read(dir.path().join("a/extended_votes.csv")).unwrap(), fs::read(dir.path().join("b/extended_votes.csv")).unwrap());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "600");
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"embeddings":"task/embeddings.emb","votes":"task/votes.csv","distance":"euclidean","radii":[0.5],"out":"from_file"}"#,
    )
    .unwrap();
    let out = lfext(&["extend", "--config", "cfg.json", "--radii", "0.02"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("from_file/extension_report.json"));
    assert_eq!(report["sources"][0]["radius"], 0.02);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), r#"{"radius":1}"#).unwrap();
    let out = lfext(&["extend", "--config", "cfg.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "1000");
    for out in ["r1", "r2"] {
        assert!(pipeline(dir.path(), out, &["--radii", "0.03"]).status.success());
    }
    for f in ["extended_votes.csv", "extension_report.json", "params.json", "posteriors.csv", "predictions.csv", "metrics.json"] {
        assert_eq!(fs::read(dir.path().join("r1").join(f)).unwrap(), fs::read(dir.path().join("r2").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn zero_radii_reproduce_the_plain_label_model() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "1000");
    assert!(pipeline(dir.path(), "p", &["--radii", "0"]).status.success());
    assert_eq!(fs::read(dir.path().join("p/extended_votes.csv")).unwrap(), fs::read(dir.path().join("task/votes.csv")).unwrap());

    let fit = vec!["fit", "--votes", "task/votes.csv", "--dev-labels", "task/dev_labels.csv", "--out", "f"];
    assert!(lfext(&fit, dir.path()).status.success());
    assert_eq!(json(&dir.path().join("p/params.json")), json(&dir.path().join("f/params.json")));

    let predict = ["predict", "--votes", "task/votes.csv", "--params", "f/params.json", "--out", "f"];
    assert!(lfext(&predict, dir.path()).status.success());
    assert_eq!(fs::read(dir.path().join("p/predictions.csv")).unwrap(), fs::read(dir.path().join("f/predictions.csv")).unwrap());
}

#[test]
fn eval_prints_metrics() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.csv"), "1\n1\n-1\n-1\n").unwrap();
    fs::write(dir.path().join("g.csv"), "1\n-1\n-1\n-1\n").unwrap();
    let out = lfext(&["eval", "--predictions", "p.csv", "--gold", "g.csv", "--metric", "accuracy"], dir.path());
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["value"], 0.75);
    assert_eq!(v["rows"], 4);
}

#[test]
fn tuned_radii_beat_no_extension() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "4000");
    let mut tune = vec!["tune"];
    tune.extend(TASK);
    tune.extend(["--dev-labels", "task/dev_labels.csv", "--out", "t"]);
    let out = lfext(&tune, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(pipeline(dir.path(), "base", &["--radii", "0"]).status.success());
    assert!(pipeline(dir.path(), "tuned", &["--radius-config", "t/radius_config.json"]).status.success());
    let base = json(&dir.path().join("base/metrics.json"))["value"].as_f64().unwrap();
    let tuned = json(&dir.path().join("tuned/metrics.json"))["value"].as_f64().unwrap();
    assert!(tuned > base, "tuned {tuned} vs base {base}");
}

#[test]
fn diagnose_reports_every_source() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "1000");
    let mut args = vec!["diagnose"];
    args.extend(TASK);
    args.extend(["--dev-labels", "task/dev_labels.csv", "--radii", "0.03", "--out", "d"]);
    let out = lfext(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("d/diagnostics.json"));
    assert_eq!(report["sources"].as_array().unwrap().len(), 3);
}
