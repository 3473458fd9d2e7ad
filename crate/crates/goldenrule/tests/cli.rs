//! End-to-end checks of the `goldenrule` binary: exit codes, report
//! sections, determinism, and lossless round-trips of both output formats.

mod common;

use std::process::{Command, Output};

use common::fixture_path;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goldenrule"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_fixture(subcommand: &str, fixture: &str, extra: &[&str]) -> Output {
    let input = fixture_path(fixture);
    let mut args = vec![subcommand, "--input", input.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn stdout_json(output: &Output) -> Value {
    serde_json::from_slice(&output.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON: {e}\n{}",
            String::from_utf8_lossy(&output.stdout)
        )
    })
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

#[test]
fn validate_accepts_the_three_peer_fixture() {
    let out = run_fixture("validate", "three_peer.json", &[]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["validation"]["ok"], Value::Bool(true));
    assert_eq!(report["manifest"]["subcommand"], "validate");
}

#[test]
fn validate_rejects_excess_row_sums_with_exit_1() {
    let out = run_fixture("validate", "row_sum_excess.json", &[]);
    assert_eq!(exit_code(&out), 1);
    let report = stdout_json(&out);
    let codes: Vec<&str> = report["validation"]["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["code"].as_str().unwrap())
        .collect();
    assert!(codes.contains(&"ROW_SUM_EXCEEDS_ONE"), "codes: {codes:?}");
}

#[test]
fn malformed_input_exits_2() {
    let out = run_fixture("validate", "malformed.json", &[]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn missing_input_flag_exits_2() {
    let out = run(&["validate"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn solve_reports_the_eigenpair() {
    let out = run_fixture("solve", "three_peer.json", &[]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    let kappa = report["eigen"]["kappa"].as_f64().unwrap();
    assert!((kappa - 2.366).abs() < 1e-3);
    assert!(report["flow"]["b"].is_array());
}

#[test]
fn solve_two_peer_symmetric_closed_form() {
    let out = run_fixture("solve", "two_peer_symmetric.json", &[]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    let expected: Value = serde_json::from_str(
        &std::fs::read_to_string(fixture_path("expected/two_peer_symmetric.expected.json"))
            .unwrap(),
    )
    .unwrap();
    let kappa = report["eigen"]["kappa"].as_f64().unwrap();
    assert!((kappa - expected["kappa"].as_f64().unwrap()).abs() < 1e-9);
    for j in 0..2 {
        let b0j = report["flow"]["b"][0][j].as_f64().unwrap();
        assert!((b0j - expected["b"][0][j].as_f64().unwrap()).abs() < 1e-12);
    }
}

#[test]
fn solve_reducible_fixture_exits_1_with_code() {
    let out = run_fixture("solve", "reducible.json", &[]);
    assert_eq!(exit_code(&out), 1);
    let report = stdout_json(&out);
    let codes: Vec<&str> = report["validation"]["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["code"].as_str().unwrap())
        .collect();
    assert!(codes.contains(&"NOT_IRREDUCIBLE"), "codes: {codes:?}");
}

#[test]
fn allocate_splits_sum_back_to_capacity() {
    let out = run_fixture("allocate", "three_peer.json", &[]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    let mu0 = report["allocation"]["mu0"].as_array().unwrap();
    let muf = report["allocation"]["mu_foreign"].as_array().unwrap();
    for (i, total) in [8.0, 7.0, 9.0].into_iter().enumerate() {
        let sum = mu0[i].as_f64().unwrap() + muf[i].as_f64().unwrap();
        assert_eq!(sum, total, "peer {i}");
    }
    // pinned full-precision regression values
    let expected = common::three_peer_expected();
    for i in 0..3 {
        let a = report["allocation"]["alpha"][i].as_f64().unwrap();
        assert!((a - expected.full_precision_chain.alpha[i]).abs() < 1e-4);
    }
}

#[test]
fn allocate_infeasible_fail_mode_lists_shortfall() {
    let out = run_fixture("allocate", "infeasible.json", &["--feasibility", "fail"]);
    assert_eq!(exit_code(&out), 1);
    let report = stdout_json(&out);
    assert_eq!(report["error"]["code"], "INFEASIBLE");
    assert!(report["error"]["message"].as_str().unwrap().contains("shortfall"));
}

#[test]
fn allocate_infeasible_thin_mode_recovers() {
    let out = run_fixture("allocate", "infeasible.json", &["--feasibility", "thin"]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    assert!(report["allocation"]["alpha"].is_array());
}

#[test]
fn simulate_is_deterministic_given_seed() {
    let args = ["--horizon", "20000", "--seed", "11", "--replications", "2"];
    let a = run_fixture("simulate", "three_peer.json", &args);
    let b = run_fixture("simulate", "three_peer.json", &args);
    assert_eq!(exit_code(&a), 0);
    let ja = stdout_json(&a);
    let jb = stdout_json(&b);
    assert_eq!(ja["simulation"], jb["simulation"]);
    assert!(ja["simulation"]["l_local"][0]["mean"].as_f64().unwrap() > 0.0);
}

#[test]
fn simulate_rejects_unstable_split() {
    let out = run_fixture(
        "simulate",
        "three_peer.json",
        &["--horizon", "1000", "--mu0", "1.0,1.0,1.0"],
    );
    assert_eq!(exit_code(&out), 1);
    let report = stdout_json(&out);
    assert_eq!(report["error"]["code"], "UNSTABLE_CONFIG");
}

#[test]
fn distributed_trace_has_one_line_per_round() {
    let out = run_fixture("distributed", "three_peer.json", &["--trace"]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    let rounds = report["distributed"]["rounds_used"].as_u64().unwrap();
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines = stderr.lines().filter(|l| !l.trim().is_empty()).count();
    assert_eq!(lines as u64, rounds);
    assert!(report["distributed"]["b_error_vs_direct"].as_f64().unwrap() < 1e-8);
    assert!(report["distributed"]["v_error_vs_direct"].as_f64().unwrap() < 1e-8);
}

#[test]
fn distributed_zero_round_budget_exits_1() {
    let out = run_fixture("distributed", "three_peer.json", &["--max-rounds", "0"]);
    assert_eq!(exit_code(&out), 1);
    let report = stdout_json(&out);
    assert_eq!(report["error"]["code"], "NO_CONVERGENCE");
}

#[test]
fn json_report_round_trips_identically() {
    let a = run_fixture("solve", "three_peer.json", &[]);
    let b = run_fixture("solve", "three_peer.json", &[]);
    let mut ja = stdout_json(&a);
    let mut jb = stdout_json(&b);
    // the timestamp is the one legitimately non-deterministic field
    ja["manifest"].as_object_mut().unwrap().remove("timestamp");
    jb["manifest"].as_object_mut().unwrap().remove("timestamp");
    assert_eq!(ja, jb);

    // parse-back identity: serializing the parsed report changes nothing
    let reparsed: Value = serde_json::from_str(&serde_json::to_string(&ja).unwrap()).unwrap();
    assert_eq!(ja, reparsed);
}

#[test]
fn csv_numbers_match_the_json_report_bitwise() {
    let json_out = run_fixture("solve", "three_peer.json", &[]);
    let csv_out = run_fixture("solve", "three_peer.json", &["--format", "csv"]);
    assert_eq!(exit_code(&csv_out), 0);
    let report = stdout_json(&json_out);
    let csv = String::from_utf8_lossy(&csv_out.stdout);

    let mut checked = 0;
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields[0] == "flow" && fields[1] == "b" {
            let i: usize = fields[2].parse().unwrap();
            let j: usize = fields[3].parse().unwrap();
            let value: f64 = fields[4].parse().unwrap();
            let from_json = report["flow"]["b"][i][j].as_f64().unwrap();
            assert_eq!(value.to_bits(), from_json.to_bits(), "b[{i}][{j}]");
            checked += 1;
        }
    }
    assert_eq!(checked, 9);
}

#[test]
fn output_flag_writes_the_report_to_a_file() {
    let dir = std::env::temp_dir().join(format!("goldenrule-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let input = fixture_path("three_peer.json");
    let out = run(&[
        "validate",
        "--input",
        input.to_str().unwrap(),
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    assert!(out.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["validation"]["ok"], Value::Bool(true));
    std::fs::remove_dir_all(&dir).ok();
}
