use std::path::Path;
use std::process::{Command, Output};

fn s3pr(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_s3pr"));
    cmd.args(args);
    for k in ["S3PR_DATA_DIR", "S3PR_WEIGHTS", "S3PR_DICTIONARY", "S3PR_OUTPUT"] {
        cmd.env_remove(k);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn check_passes() {
    let out = s3pr(&["check"], &[]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{stdout}");
}

#[test]
fn run_then_gridplot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    std::fs::write(&cfg, "dataset = planted\narch = toy\ngenerator = random:1\ntrials = 2\niterations = 5\nrestarts = 1\n").unwrap();
    let out = s3pr(&["run", "--config", cfg.to_str().unwrap(), "--output", tmp.path().join("o").to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("deep"));

    let run_dir = std::fs::read_dir(tmp.path().join("o")).unwrap().next().unwrap().unwrap().path();
    let report = run_dir.join("report.csv");
    let csv = tmp.path().join("agg.csv");
    let out = s3pr(&["gridplot", report.to_str().unwrap(), report.to_str().unwrap(), "--csv", csv.to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let table = text(&out.stdout);
    assert!(table.starts_with("dataset"));
    assert!(table.lines().nth(1).unwrap().contains("planted"));
    let agg = std::fs::read_to_string(csv).unwrap();
    assert_eq!(agg.lines().nth(1).unwrap().split(',').nth(5), Some("4"));
}

#[test]
fn missing_weights_is_a_diagnosed_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    std::fs::write(&cfg, "dataset = planted\ntrials = 1\n").unwrap();
    let out = s3pr(&["run", "--config", cfg.to_str().unwrap()], &[("S3PR_WEIGHTS", &tmp.path().join("none.bin")), ("S3PR_OUTPUT", tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("weights file"), "{}", text(&out.stderr));
}

#[test]
fn bad_config_line_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    std::fs::write(&cfg, "dataset = planted\ncolour = blue\n").unwrap();
    let out = s3pr(&["run", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("line 2"));
}

#[test]
fn unreadable_report_fails() {
    let out = s3pr(&["gridplot", "/nonexistent/report.csv"], &[]);
    assert_eq!(out.status.code(), Some(2));
}
