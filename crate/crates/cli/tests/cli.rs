//! Command-line behaviour: outputs, exit codes and reproducibility.

mod common;

use common::{fast_config, ok, path_str, run, synth_and_featurize};
use workr::harness::parse_table_csv;

fn data_rows(csv: &std::path::Path) -> usize {
    std::fs::read_to_string(csv).unwrap().lines().count() - 1
}

#[test]
fn synth_writes_two_logs_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "synth",
        "--users",
        "1",
        "--days",
        "1",
        "--out",
        path_str(dir.path()),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("users: 6"));
    assert!(stdout.contains("records_written: "));
    for f in ["sensors.jsonl", "annotations.jsonl"] {
        assert!(std::fs::metadata(dir.path().join(f)).unwrap().len() > 0);
    }
}

#[test]
fn zero_days_gives_empty_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--days", "0", "--out", path_str(dir.path())]);
    for f in ["sensors.jsonl", "annotations.jsonl"] {
        assert_eq!(std::fs::metadata(dir.path().join(f)).unwrap().len(), 0);
    }
}

#[test]
fn describe_prints_the_profile_table() {
    let out = ok(&["synth", "--describe"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 8);
    assert!(text.contains("Technicians"));
}

#[test]
fn featurize_emits_78_feature_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_and_featurize(dir.path(), 1, 2, 1);
    let text = std::fs::read_to_string(&csv).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 3 + 78);
    assert_eq!(&header[..3], ["user", "slot_start", "label"]);
}

#[test]
fn half_stride_roughly_doubles_rows() {
    let dir = tempfile::tempdir().unwrap();
    let base = synth_and_featurize(dir.path(), 1, 3, 1);
    let dense = dir.path().join("dense.csv");
    ok(&[
        "featurize",
        path_str(&dir.path().join("sensors.jsonl")),
        path_str(&dir.path().join("annotations.jsonl")),
        "--stride",
        "450",
        "--out",
        path_str(&dense),
    ]);
    let ratio = data_rows(&dense) as f64 / data_rows(&base) as f64;
    assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}");
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_and_featurize(dir.path(), 1, 3, 1);
    let missing = dir.path().join("nope.jsonl");
    let sensors = dir.path().join("sensors.jsonl");

    let out = run(&["featurize", path_str(&sensors), path_str(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.jsonl"));

    assert_eq!(
        run(&["evaluate", path_str(&csv), "--features", "PXZ"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "evaluate",
            path_str(&csv),
            "--features",
            "none",
            "--latent",
            "none"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(&["evaluate", path_str(&csv), "--repeats", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["ablate", path_str(&csv), "--bogus"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "featurize",
            path_str(&sensors),
            path_str(&sensors),
            "--stride",
            "0"
        ])
        .status
        .code(),
        Some(2)
    );

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"unknown_knob": 1}"#).unwrap();
    assert_eq!(
        run(&["synth", "--config", path_str(&bad)]).status.code(),
        Some(2)
    );

    // A directory where a file is expected cannot be created: internal error.
    let out = run(&[
        "evaluate",
        path_str(&csv),
        "--repeats",
        "1",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn csv_output_to_file_keeps_stdout_quiet() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_and_featurize(dir.path(), 1, 3, 1);
    let table = dir.path().join("t.csv");
    let out = ok(&[
        "ablate",
        path_str(&csv),
        "--mode",
        "preprocessed",
        "--model",
        "nb",
        "--repeats",
        "1",
        "--format",
        "csv",
        "--out",
        path_str(&table),
    ]);
    assert!(out.stdout.is_empty());
    let rows = parse_table_csv(&std::fs::read_to_string(&table).unwrap()).unwrap();
    assert_eq!(rows.len(), 15);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"seed": 7, "repeats": 3, "synth": {"days": 1}}"#).unwrap();
    let out = ok(&[
        "synth",
        "--config",
        path_str(&cfg),
        "--seed",
        "9",
        "--days",
        "0",
        "--verbose",
        "--out",
        path_str(dir.path()),
    ]);
    let echoed: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(echoed["command"], "synth");
    assert_eq!(echoed["config"]["seed"], 9);
    assert_eq!(echoed["config"]["synth"]["seed"], 9);
    assert_eq!(echoed["config"]["synth"]["days"], 0);
    assert_eq!(
        echoed["config"]["experiment"]["seeds"],
        serde_json::json!([9, 10, 11])
    );
}

#[test]
fn evaluate_prints_a_one_row_table_and_saves_models() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_and_featurize(dir.path(), 1, 3, 1);
    let fast = fast_config(dir.path(), 5);
    let models = dir.path().join("models");
    let out = ok(&[
        "evaluate",
        path_str(&csv),
        "--config",
        path_str(&fast),
        "--features",
        "PAS",
        "--latent",
        "PAS",
        "--repeats",
        "2",
        "--model-out",
        path_str(&models),
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("| P")).collect();
    assert_eq!(rows.len(), 1, "{text}");
    assert!(rows[0].starts_with("| P+ A+ S | P+ A+ S | gbm |"));
    for f in ["gbm.json", "vae.json", "normalizer.json"] {
        assert!(models.join(f).exists(), "{f}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let csv_a = synth_and_featurize(a.path(), 1, 3, 4);
    let csv_b = synth_and_featurize(b.path(), 1, 3, 4);
    for f in ["sensors.jsonl", "annotations.jsonl", "features.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let table = |csv: &std::path::Path| {
        ok(&["evaluate", path_str(csv), "--model", "nb", "--repeats", "2"]).stdout
    };
    assert_eq!(table(&csv_a), table(&csv_b));
}
