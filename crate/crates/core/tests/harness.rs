use std::fs;
use std::path::Path;
use std::process::Command;

use idbc::channel::{Dmc, Pmf};
use idbc::harness::{read_records, run_sweep, sidecar_path, write_records, ExperimentConfig, Status};
use idbc::id_dmc::IdParams;

const BSC: &str = r#"{"input_size": 2, "output_sizes": [2], "probs": [0.9, 0.1, 0.1, 0.9]}"#;

fn config(dir: &Path, grid: &str, extra: &str) -> ExperimentConfig {
    fs::write(dir.join("bsc.json"), BSC).unwrap();
    let text = format!(
        r#"{{"channel": "bsc.json", "scheme": "dmc", "grid": {grid}, "seeds": [4, 5, 6],
            "mode": {{"kind": "exact", "budget_states": 4096}}{extra}}}"#
    );
    let path = dir.join("sweep.json");
    fs::write(&path, text).unwrap();
    ExperimentConfig::load(&path).unwrap()
}

const TWO_POINTS: &str = r#"{"n": [5, 6], "rates": [[0.05, 0.2, 0.35]], "m_counts": [[3]], "eps": [0.5]}"#;

#[test]
fn empty_grid_gives_no_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"n": [], "rates": [[0.05, 0.2, 0.35]], "m_counts": [[3]], "eps": [0.5]}"#, "");
    let out = run_sweep(&cfg).unwrap();
    assert!(out.records.is_empty());
    assert_eq!(out.computed, 0);
    assert!(out.all_completed());
}

#[test]
fn two_points_three_seeds_give_six_records_in_grid_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), TWO_POINTS, "");
    let out = run_sweep(&cfg).unwrap();
    assert_eq!(out.records.len(), 6);
    assert_eq!(out.computed, 6);
    let keys: Vec<(usize, usize, usize)> = out.records.iter().map(|r| (r.point, r.trial, r.n)).collect();
    assert_eq!(keys, vec![(0, 0, 5), (0, 1, 5), (0, 2, 5), (1, 0, 6), (1, 1, 6), (1, 2, 6)]);
    assert!(out.records.iter().all(|r| r.status == Status::Ok && r.max_error.is_some()));
    assert_eq!(out.records[1].seed, 5);
}

#[test]
fn rerun_reuses_rows_and_rewrites_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs.csv");
    let cfg = config(dir.path(), TWO_POINTS, &format!(r#", "out": {:?}"#, out));
    assert_eq!(run_sweep(&cfg).unwrap().computed, 6);
    let csv = fs::read(&out).unwrap();
    let side = fs::read(sidecar_path(&out)).unwrap();

    let again = run_sweep(&cfg).unwrap();
    assert_eq!(again.computed, 0);
    assert_eq!(fs::read(&out).unwrap(), csv);
    assert_eq!(fs::read(sidecar_path(&out)).unwrap(), side);

    // Drop two rows; only those are recomputed and the file is restored.
    let mut rows = read_records(&out).unwrap();
    rows.remove(4);
    rows.remove(1);
    write_records(&out, &rows).unwrap();
    assert_eq!(run_sweep(&cfg).unwrap().computed, 2);
    assert_eq!(fs::read(&out).unwrap(), csv);
}

#[test]
fn changed_config_recomputes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs.csv");
    let cfg = config(dir.path(), TWO_POINTS, &format!(r#", "out": {:?}"#, out));
    run_sweep(&cfg).unwrap();
    let other = config(
        dir.path(),
        r#"{"n": [5, 6], "rates": [[0.05, 0.2, 0.35]], "m_counts": [[3]], "eps": [0.6]}"#,
        &format!(r#", "out": {:?}"#, out),
    );
    assert_ne!(cfg.hash(&cfg.load_channel().unwrap()), other.hash(&other.load_channel().unwrap()));
    assert_eq!(run_sweep(&other).unwrap().computed, 6);
}

#[test]
fn budget_overruns_are_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        r#"{"n": [14], "rates": [[0.05, 0.2, 0.35]], "m_counts": [[3]], "eps": [0.5]}"#,
        "",
    );
    let out = run_sweep(&cfg).unwrap();
    assert_eq!(out.records.len(), 3);
    assert!(out.records.iter().all(|r| r.status == Status::Budget && r.max_error.is_none()));
    assert!(!out.all_completed());
}

#[test]
fn config_validation_reports_the_validator_reason_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Bin rate above I(P, W) = ln2 − h(0.1) ≈ 0.368.
    let cfg = config(dir.path(), r#"{"n": [6], "rates": [[0.05, 0.4, 0.5]], "m_counts": [[3]], "eps": [0.5]}"#, "");
    let direct = IdParams {
        n: 6,
        m_count: 3,
        id_rate: 0.05,
        bin_rate: 0.4,
        pool_rate: 0.5,
        input_pmf: Pmf::uniform(2),
        eps: 0.5,
        seed: 0,
    }
    .validate(&Dmc::bsc(0.1));
    assert!(!direct.is_valid());
    let err = run_sweep(&cfg).unwrap_err().to_string();
    assert!(err.contains(&direct.error_codes()), "{err} lacks {}", direct.error_codes());
    assert!(err.contains("bin-rate-not-below-information"));

    let cfg = config(dir.path(), TWO_POINTS.replace("[0.5]}", "[0.5], \"mu\": [0.3]}").as_str(), "");
    assert!(run_sweep(&cfg).unwrap_err().to_string().contains("mu 0.3 outside"));
}

fn idbc(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_idbc"))
        .args(args)
        .current_dir(dir)
        .env("IDBC_WORKERS", "1")
        .output()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    config(dir.path(), TWO_POINTS, "");
    let ok = idbc(dir.path(), &["capacity", "bsc.json"]);
    assert_eq!(ok.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    let c = rows[0]["capacity"].as_f64().unwrap();
    let h = -(0.1f64 * 0.1f64.ln() + 0.9 * 0.9f64.ln());
    assert!((c - (2f64.ln() - h)).abs() < 1e-9);

    assert_eq!(idbc(dir.path(), &["capacity"]).status.code(), Some(2));
    assert_eq!(idbc(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(idbc(dir.path(), &["capacity", "missing.json"]).status.code(), Some(1));
    assert_eq!(idbc(dir.path(), &["simulate", "sweep.json", "--out", "a.csv"]).status.code(), Some(0));
    // An exact budget too small for n = 6 leaves every run incomplete.
    assert_eq!(
        idbc(dir.path(), &["simulate", "sweep.json", "--budget-states", "8", "--out", "b.csv"]).status.code(),
        Some(3)
    );
    let inside = idbc(dir.path(), &["region", "bsc.json", "--kind", "dmc-capacity", "--query", "0.3"]);
    assert_eq!(inside.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&inside.stdout).unwrap();
    assert_eq!(v["inside"], serde_json::Value::Bool(true));
}
