use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn weasl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weasl")).args(args).current_dir(dir).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Data lines of a CSV file, without `#` comments and the header.
fn rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn gen_purity_writes_deterministic_groups() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen", "purity", "--f", "0.6", "--groups", "50", "--seed", "7", "-o", "a.csv"];
    ok(&weasl(&args, dir.path()));
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    ok(&weasl(&args, dir.path()));
    assert_eq!(a, fs::read(dir.path().join("a.csv")).unwrap());
    assert!(dir.path().join("a.csv.meta").exists());

    let text = String::from_utf8(a).unwrap();
    let data = rows(&text);
    assert_eq!(data.len(), 2000);
    let groups: std::collections::BTreeSet<&str> = data.iter().map(|r| r.split(',').nth(3).unwrap()).collect();
    assert_eq!(groups.len(), 100);
}

#[test]
fn non_integral_purity_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = weasl(&["gen", "purity", "--f", "0.37"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integer"));
    assert!(!dir.path().join("data.csv").exists());
}

#[test]
fn usage_and_runtime_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(weasl(&["train", "--method", "nonsense"], dir.path()).status.code(), Some(1));
    assert_eq!(weasl(&["experiment", "purity_sweep", "--set", "bogus=1"], dir.path()).status.code(), Some(1));
    let missing = weasl(&["eval", "--model", "nope.txt", "--test", "nope.csv"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(weasl(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn train_then_eval_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&weasl(&["gen", "sample", "--n-pos", "10", "--n-neg", "10", "--seed", "1", "-o", "strong.csv"], d));
    ok(&weasl(&["gen", "purity", "--f", "0.8", "--seed", "2", "-o", "weak.csv"], d));
    ok(&weasl(&["gen", "purity", "--f", "0.8", "--seed", "3", "--no-groups", "-o", "test.csv"], d));
    let trained = ok(&weasl(
        &[
            "train", "--strong", "strong.csv", "--weak", "weak.csv", "--test", "test.csv", "--method", "weasl", "--mode",
            "imbalanced", "--beta", "auto", "--scorer", "logistic", "--epochs", "60", "-o", "model.txt",
        ],
        d,
    ));
    let model = fs::read_to_string(d.join("model.txt")).unwrap();
    assert!(model.contains("note=beta_source=auto"));
    let beta_line = model.lines().find(|l| l.starts_with("beta_hat=")).unwrap();
    assert!(beta_line["beta_hat=".len()..].parse::<f64>().is_ok(), "{beta_line}");

    let evaluated = ok(&weasl(&["eval", "--model", "model.txt", "--test", "test.csv"], d));
    assert_eq!(rows(&trained), rows(&evaluated));
    assert_eq!(rows(&trained).len(), 1);
}

#[test]
fn imbalanced_training_needs_a_beta_source() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&weasl(&["gen", "sample", "--n-pos", "5", "--n-neg", "5", "-o", "s.csv"], d));
    ok(&weasl(&["gen", "purity", "--f", "0.8", "--groups", "5", "-o", "w.csv"], d));
    let out = weasl(&["train", "--strong", "s.csv", "--weak", "w.csv", "--method", "weasl", "--mode", "imbalanced"], d);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn estimate_beta_on_half_pure_groups() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&weasl(&["gen", "sample", "--n-pos", "50", "--n-neg", "50", "--seed", "4", "-o", "s.csv"], d));
    ok(&weasl(&["gen", "purity", "--f", "0.5", "--groups", "250", "--seed", "5", "-o", "w.csv"], d));
    let out = ok(&weasl(&["estimate-beta", "--strong", "s.csv", "--weak", "w.csv", "--scorer", "logistic"], d));
    let value: f64 = out.trim().strip_prefix("beta_hat=").unwrap().parse().unwrap();
    assert!((value - 1.0 / 3.0).abs() <= 0.03, "beta_hat={value}");
}

#[test]
fn experiment_and_report_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "experiment", "purity_sweep", "--values", "0.8", "--seeds", "0..2", "--methods", "weasl,only_strong", "--set",
        "epochs=40", "--set", "lambdas=10", "-o", "run", "--quiet",
    ];
    ok(&weasl(&args, d));
    for f in ["results.csv", "summary.csv", "plot.csv", "plot.svg"] {
        assert!(d.join("run").join(f).exists(), "{f}");
    }
    let results = fs::read_to_string(d.join("run/results.csv")).unwrap();
    assert_eq!(rows(&results).len(), 4);
    ok(&weasl(&["report", "--results", "run/results.csv", "-o", "again"], d));
    let a = fs::read_to_string(d.join("run/summary.csv")).unwrap();
    let b = fs::read_to_string(d.join("again/summary.csv")).unwrap();
    assert_eq!(rows(&a), rows(&b));
}
