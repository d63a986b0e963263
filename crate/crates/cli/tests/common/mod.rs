//! Helpers for driving the `workr` binary.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn workr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_workr"))
}

/// Runs the binary and returns its output.
pub fn run(args: &[&str]) -> Output {
    workr().args(args).output().expect("binary runs")
}

/// Runs the binary and panics with stderr unless it exits 0.
pub fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "workr {args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Synthesizes logs into `dir` and featurizes them into `dir/features.csv`.
pub fn synth_and_featurize(dir: &Path, users: usize, days: usize, seed: u64) -> PathBuf {
    let (users, days, seed) = (users.to_string(), days.to_string(), seed.to_string());
    ok(&[
        "synth",
        "--users-per-class",
        &users,
        "--days",
        &days,
        "--seed",
        &seed,
        "--out",
        path_str(dir),
    ]);
    let csv = dir.join("features.csv");
    ok(&[
        "featurize",
        path_str(&dir.join("sensors.jsonl")),
        path_str(&dir.join("annotations.jsonl")),
        "--out",
        path_str(&csv),
    ]);
    csv
}

/// Writes a config file that shortens VAE training for structural tests.
pub fn fast_config(dir: &Path, epochs: usize) -> PathBuf {
    let path = dir.join("fast.json");
    let body = format!(r#"{{"experiment": {{"vae": {{"epochs": {epochs}}}}}}}"#);
    std::fs::write(&path, body).unwrap();
    path
}
