//! End-to-end tests of the `cellzoom` binary: exit-code mapping, artifact
//! layout, and the scenario round-trip guarantee.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cellzoom::harness::{read_scenario_csv, write_scenario_csv};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cellzoom"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "expected success for {args:?}, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn reference_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.json")
}

/// Writes a copy of the reference config with `from` replaced by `to`.
fn edited_config(dir: &Path, from: &str, to: &str) -> PathBuf {
    let text = std::fs::read_to_string(reference_config()).unwrap();
    assert!(text.contains(from), "edit anchor `{from}` missing");
    let path = dir.join("edited.json");
    std::fs::write(&path, text.replace(from, to)).unwrap();
    path
}

#[test]
fn help_exits_zero_and_lists_subcommands() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["simulate", "compare", "privacy-budget", "approx-error", "truncation-error", "scenario-gen"] {
        assert!(text.contains(name), "help is missing `{name}`");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["simulate", "--bogus-flag"]).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // Unreadable parameter file.
    let missing = run(&["simulate", "--config", "/no/such/params.json"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("configuration error"));
    // Readable file, invalid value.
    let bad = edited_config(dir.path(), "\"gamma\": 0.32", "\"gamma\": 2.0");
    assert_eq!(run(&["simulate", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    // Valid parameters, invalid flag value.
    let out_dir = dir.path().join("out");
    let args = ["simulate", "--t-iters", "0", "--out", out_dir.to_str().unwrap()];
    assert_eq!(run(&args).status.code(), Some(2));
}

#[test]
fn solver_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    // Seventeen cells overflow the enumeration baseline's schedule cap:
    // a valid configuration whose requested run cannot execute.
    let config = edited_config(dir.path(), "\"n\": 4", "\"n\": 17");
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--scenario",
        "random",
        "--method",
        "centralized",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("runtime error"));
}

#[test]
fn privacy_budget_prints_reference_rows() {
    let text = run_ok(&["privacy-budget", "--n", "4", "--lambda-thresh", "30", "--zeta", "0.01"]);
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key},")))
            .unwrap_or_else(|| panic!("row `{key}` missing from:\n{text}"))
            .parse()
            .unwrap()
    };
    assert!((value("proposed_max_ratio") - 2.6284).abs() < 0.01);
    assert!((value("bernstein_max_ratio") - 1.41554).abs() < 0.001);
}

#[test]
fn scenario_gen_round_trips_and_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    for path in [&first, &second] {
        run_ok(&["scenario-gen", "--n", "5", "--seed", "9", "--out", path.to_str().unwrap()]);
    }
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());

    // Reading the artifact back and rewriting it reproduces it exactly.
    let scenario = read_scenario_csv(&first).unwrap();
    assert_eq!(scenario.n, 5);
    let rewritten = dir.path().join("c.csv");
    write_scenario_csv(&scenario, &rewritten).unwrap();
    let originals = std::fs::read_to_string(&first).unwrap();
    let copies = std::fs::read_to_string(&rewritten).unwrap();
    // Labels come from file stems, so compare the data rows.
    assert_eq!(originals, copies);
}

#[test]
fn simulate_writes_trace_and_metrics_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("artifacts");
    run_ok(&[
        "simulate",
        "--method",
        "distributed",
        "--rho",
        "10",
        "--seed",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let trace = out_dir.join("trace_distributed-closed-form_rho10_seed1.csv");
    let metrics = out_dir.join("metrics_distributed-closed-form_rho10_seed1.csv");
    let trace_text = std::fs::read_to_string(&trace).unwrap();
    // Header plus one row per (step, cell) pair.
    assert_eq!(trace_text.lines().count(), 1 + 577 * 4);
    assert_eq!(trace_text.lines().next().unwrap(), "k,i,users,masked,users_served,u_w,s_w,x_j,mu");
    let metrics_text = std::fs::read_to_string(&metrics).unwrap();
    assert!(metrics_text.starts_with("metric,value\n"));
    assert!(metrics_text.contains("energy_efficiency_users_per_kj,"));
}

#[test]
fn simulate_accepts_a_generated_scenario_file() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("builtin.csv");
    run_ok(&["scenario-gen", "--builtin", "--out", scenario.to_str().unwrap()]);
    let out_dir = dir.path().join("out");
    let text = run_ok(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(text.contains("energy efficiency"));
}

#[test]
fn truncation_error_is_zero_at_the_reference_budget() {
    let text = run_ok(&["truncation-error", "--t-values", "30"]);
    assert!(text.contains("30,0.000000"), "unexpected sweep output:\n{text}");
}

#[test]
fn approx_error_sweep_reports_both_errors() {
    let text = run_ok(&["approx-error", "--points", "1", "--s-active-min", "1.5", "--s-active-max", "1.5"]);
    let row = text.lines().nth(1).unwrap_or_else(|| panic!("no data row in:\n{text}"));
    let fields: Vec<f64> = row.split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(fields[0], 1.5);
    assert!(fields[1] > 0.0 && fields[1] < 5.0);
    assert!(fields[2] > 0.0 && fields[2] < 5.0);
}

#[test]
fn approx_error_sweep_handles_its_default_lower_endpoint() {
    // The default range starts exactly at the sleep power, a degenerate
    // configuration where active and sleep modes cost the same.
    let text = run_ok(&["approx-error", "--points", "1", "--s-active-min", "0.5", "--s-active-max", "0.5"]);
    assert!(text.lines().nth(1).is_some_and(|row| row.starts_with("0.5,")), "output:\n{text}");
}

#[test]
fn compare_tabulates_both_methods() {
    let text = run_ok(&["compare", "--rhos", "0", "--samples", "1"]);
    assert!(text.contains("centralized,0,"));
    assert!(text.contains("distributed-closed-form,0,"));
}
