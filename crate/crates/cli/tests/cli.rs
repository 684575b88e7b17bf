//! End-to-end runs of the binary: output files and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn tierlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tierlab")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("killed by signal")
}

fn generated(dir: &Path) {
    let o = tierlab(dir, &["generate", "--seed", "3", "--duration", "7200", "--out", "t.jsonl"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generate_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    generated(dir.path());
    let text = std::fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    assert!(text.starts_with("{\"tierlab_trace\":1"));
    let o = tierlab(dir.path(), &["simulate", "--trace", "t.jsonl", "--policy", "firstfit", "--quota-fraction", "0.1", "--out-dir", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("run/summary.csv")).unwrap();
    assert!(summary.starts_with("policy,quota_bytes,"));
    let jobs = std::fs::read_to_string(dir.path().join("run/jobs.csv")).unwrap();
    assert_eq!(jobs.lines().count(), text.lines().count());
}

#[test]
fn oracle_solution_replays_without_spills() {
    let dir = tempfile::tempdir().unwrap();
    generated(dir.path());
    let o = tierlab(dir.path(), &["oracle", "--trace", "t.jsonl", "--objective", "tco", "--quota", "5e10", "--out", "sol.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = tierlab(
        dir.path(),
        &["simulate", "--trace", "t.jsonl", "--policy", "oracle-replay", "--solution", "sol.csv", "--quota", "5e10", "--out-dir", "run"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains(" 0 spills"));
}

#[test]
fn bad_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = tierlab(dir.path(), &["simulate", "--trace", "missing.jsonl", "--policy", "firstfit", "--quota-fraction", "0.1", "--out-dir", "run"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.matches("os error 2").count(), 1, "{err}");

    std::fs::write(dir.path().join("bad.jsonl"), "{\"bad\":1}\n").unwrap();
    let o = tierlab(dir.path(), &["simulate", "--trace", "bad.jsonl", "--policy", "firstfit", "--quota-fraction", "0.1", "--out-dir", "run"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));

    let o = tierlab(dir.path(), &["simulate", "--trace", "bad.jsonl", "--policy", "nonsense", "--quota-fraction", "0.1", "--out-dir", "run"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn rates_show_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = tierlab(dir.path(), &["rates", "show"]);
    assert_eq!(code(&o), 0);
    std::fs::write(dir.path().join("rates.toml"), &o.stdout).unwrap();
    let again = tierlab(dir.path(), &["rates", "show", "--rates", "rates.toml"]);
    assert_eq!(code(&again), 0);
    assert_eq!(o.stdout, again.stdout);
}
