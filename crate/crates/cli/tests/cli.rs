use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use symtc::harness::phase_probability;
use symtc::io::{load_model, save_model, save_tensor};
use symtc::sampling::sample_bernoulli;
use symtc::tensor::{generate_orthogonal_model, rmse};

fn symtc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symtc")).args(args).output().expect("spawn symtc")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of CSV output, skipping the config comment and the header.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn completes_a_fully_observed_rank_one_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let truth = generate_orthogonal_model(8, 1, &[2.0], 1).unwrap();
    let tensor = dir.path().join("t.txt");
    let model = dir.path().join("m.json");
    save_tensor(&tensor, &sample_bernoulli(&truth, 1.0, 2).unwrap()).unwrap();
    let out = symtc(&["complete", path(&tensor), "-r", "1", "--out", path(&model)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(rmse(&load_model(&model).unwrap(), &truth).unwrap() < 1e-9);
}

#[test]
fn recovers_a_sampled_rank_three_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let n = 50;
    let truth = generate_orthogonal_model(n, 3, &[1.0; 3], 5).unwrap();
    let p = phase_probability(n, 3, 0.0, 8.0);
    let (tensor, truth_file, model, trace) = (
        dir.path().join("t.txt"),
        dir.path().join("truth.json"),
        dir.path().join("m.json"),
        dir.path().join("trace.csv"),
    );
    save_tensor(&tensor, &sample_bernoulli(&truth, p, 6).unwrap()).unwrap();
    save_model(&truth_file, &truth).unwrap();
    let mu = format!("{}", truth.incoherence());
    let p_arg = format!("{p}");
    let out = symtc(&[
        "complete", path(&tensor), "-r", "3", "--p", &p_arg, "--mu", &mu, "--tau", "300",
        "--update-order", "gauss-seidel", "--truth", path(&truth_file), "--trace", path(&trace),
        "--out", path(&model),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(rmse(&load_model(&model).unwrap(), &truth).unwrap() < 1e-7);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("iter,fit_error,rmse,d_infinity,seconds\n"));
    let last = csv_rows(&text).pop().unwrap();
    assert!(last[2].parse::<f64>().unwrap() < 1e-7);
}

#[test]
fn rejects_empty_and_malformed_tensors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "symtensor3 n=5 nnz=0\n").unwrap();
    let out = symtc(&["complete", path(&empty), "-r", "1"]);
    assert_eq!(out.status.code(), Some(1));

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "symtensor3 n=5 nnz=2\n0 1 2 0.5\n0 1 9 0.5\n").unwrap();
    let out = symtc(&["complete", path(&bad), "-r", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = symtc(&["complete", path(&dir.path().join("missing.txt")), "-r", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn counterexample_report() {
    let out = symtc(&["max3lin", "--mode", "counterexample"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["connected"], true);
    assert_eq!(v["sequence"], serde_json::json!([[1, 2, 3], [2, 3, 4], [3, 4, 5]]));
    assert_eq!(v["solution_count"], 4);
    assert_eq!(
        v["solutions"],
        serde_json::json!([[1, 1, 1, -1, -1], [1, -1, -1, -1, 1], [-1, 1, -1, 1, -1], [-1, -1, 1, 1, 1]])
    );
    assert_eq!(v["verified"], true);
    assert_eq!(v["matches_published"], false);
}

#[test]
fn solves_complete_max3lin_instances() {
    let out = symtc(&["max3lin", "--n", "20", "--p", "1", "--trials", "2", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["success_rate"], 1.0);
    for row in v["rows"].as_array().unwrap() {
        assert_eq!(row["equations"], 1140);
        assert_eq!(row["satisfied"], 1140);
    }
}

#[test]
fn truth_initialized_trace_is_zero() {
    let out = symtc(&["convergence", "--n", "20", "--r", "2", "--init-truth"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("# {"));
    let rows = csv_rows(&text);
    assert!(!rows.is_empty());
    for row in rows {
        for col in &row[1..4] {
            assert_eq!(col.parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn spectral_ratio_vanishes_at_full_sampling() {
    let out = symtc(&["spectral", "--n", "10", "--alphas", "1000", "--seeds", "3"]);
    assert!(out.status.success());
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!(row[1], "1.0");
        assert_eq!(row[3].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn phase_json_output() {
    let out = symtc(&[
        "phase", "--n", "12", "--alpha-min", "0", "--alpha-max", "1000", "--alpha-steps", "2", "--trials", "3",
        "--format", "json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["config"]["trials"], 3);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["recovery_rate"], 0.0);
    assert_eq!(rows[1]["clamped"], true);
    assert_eq!(rows[1]["recovery_rate"], 1.0);
}
