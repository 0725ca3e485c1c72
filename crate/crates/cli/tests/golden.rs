//! End-to-end runs of the `latgas` binary against checked-in outputs.
//!
//! Set `UPDATE_GOLDEN=1` to rewrite the files under `tests/golden/`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dir(sub: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(sub)
}

fn latgas(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_latgas"));
    cmd.args(args).env_remove("LATGAS_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    latgas(args).output().expect("spawn latgas")
}

fn config(name: &str) -> String {
    dir("configs").join(name).to_str().unwrap().to_string()
}

fn check_golden(name: &str, actual: &[u8]) {
    let path = dir("golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}; rerun with UPDATE_GOLDEN=1", path.display()));
    assert!(
        expected == actual,
        "{name} differs from golden output:\n{}",
        String::from_utf8_lossy(actual)
    );
}

fn golden_case(subcommand: &str, cfg: &str, golden: &str) {
    let out = run(&[subcommand, &config(cfg)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    check_golden(golden, &out.stdout);
}

#[test]
fn simulate_golden() {
    golden_case("simulate", "simulate_tasep.toml", "simulate_tasep.csv");
}

#[test]
fn exact_golden() {
    golden_case("exact", "exact_tasep.toml", "exact_tasep.csv");
    golden_case("exact", "exact_table.toml", "exact_table.json");
}

#[test]
fn verify_law_golden() {
    golden_case("verify-law", "verify_tasep.toml", "verify_tasep.csv");
    golden_case("verify-law", "verify_ising.toml", "verify_ising.json");
}

#[test]
fn profile_golden() {
    golden_case("profile", "profile_tasep.toml", "profile_tasep.csv");
}

#[test]
fn ising_tau_golden() {
    golden_case("ising-tau", "ising_tau.toml", "ising_tau.csv");
}

#[test]
fn scan_golden() {
    golden_case("scan", "scan_tasep.toml", "scan_tasep.csv");
}

#[test]
fn run_uses_mode_from_file() {
    let a = run(&["run", &config("profile_tasep.toml")]);
    let b = run(&["profile", &config("profile_tasep.toml")]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_tasep_reports_exact_tau() {
    let out = run(&["verify-law", &config("verify_tasep.toml")]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let field = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(field("tau").parse::<f64>().unwrap(), 2.5);
    assert_eq!(field("seed"), "0");
    assert_eq!(field("replicas"), "8");
    assert_eq!(field("verdict"), "pass");
}

#[test]
fn invalid_config_exits_2_with_line() {
    let out = run(&["exact", &config("invalid.toml")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 6: model.alpha"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn wrong_model_for_mode_exits_2() {
    let out = run(&["ising-tau", &config("exact_tasep.toml")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_exits_2() {
    let out = run(&["exact", "/nonexistent/latgas.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_verification_exits_1_but_writes_report() {
    let out = run(&["verify-law", &config("biased_verify.toml")]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",fail"), "{text}");
}

#[test]
fn flags_override_file_and_write_to_path() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("out.json");
    let out = run(&[
        "simulate",
        &config("simulate_tasep.toml"),
        "--seed",
        "9",
        "--replicas",
        "2",
        "--max-jumps",
        "500",
        "--format",
        "json",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["seed"], 9);
    assert_eq!(rows[0]["n_jumps"], 500);
    assert_eq!(rows[2]["replica"], "pooled");
}

#[test]
fn output_is_independent_of_thread_count() {
    let args = ["simulate", &config("simulate_tasep.toml")];
    let default = run(&args);
    for threads in ["1", "3"] {
        let out = latgas(&args).env("LATGAS_THREADS", threads).output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(out.stdout, default.stdout, "LATGAS_THREADS={threads}");
    }
}

#[test]
fn bad_thread_count_exits_2() {
    let out = latgas(&["exact", &config("exact_tasep.toml")]).env("LATGAS_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    for (cmd, cfg) in [("simulate", "simulate_tasep.toml"), ("verify-law", "verify_ising.toml")] {
        let a = run(&[cmd, &config(cfg)]);
        let b = run(&[cmd, &config(cfg)]);
        assert_eq!(a.stdout, b.stdout, "{cfg}");
    }
}
