//! Operator entry point. Every subcommand reads one spec file, runs the
//! corresponding computation, and emits one machine-readable report.
//!
//! Exit codes: 0 success, 1 domain failure (validation, infeasibility,
//! instability, no convergence), 2 usage or parse error.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::allocation::{golden_rule_pipeline, FeasibilityAction, PipelineOptions};
use crate::distributed::{flow_balance_rounds, run_until_converged, InitialVector, RunOptions};
use crate::error::Error;
use crate::flowbalance::solve_flow_balance;
use crate::jackson::{simulate, SimConfig};
use crate::linalg::linf_diff;
use crate::model::{validate_spec, NetworkSpec};
use crate::report::{DistributedReport, ErrorInfo, Report, RunManifest, SpecFile};
use crate::spectral::{perron_eigenpair, PowerOptions};

#[derive(Debug, Parser)]
#[command(
    name = "goldenrule",
    version,
    about = "Golden-rule capacity allocation for peer-to-peer query networks"
)]
pub struct Cli {
    /// Network spec file (JSON).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Report destination; standard output when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Feasibility {
    /// Stop with the shortfall list when capacities are insufficient.
    Fail,
    /// Raise capacities to clear the feasibility condition.
    Augment,
    /// Scale demand down to clear the feasibility condition.
    Thin,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the structural invariants of a network spec.
    Validate,
    /// Solve flow balance and compute the dominant eigenpair.
    Solve {
        /// Eigen-residual tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iters: usize,
    },
    /// Run the golden-rule procedure end to end.
    Allocate {
        #[arg(long, value_enum, default_value_t = Feasibility::Fail)]
        feasibility: Feasibility,
        /// Safety margin for the repair modes.
        #[arg(long, default_value_t = 0.05)]
        margin: f64,
    },
    /// Validate the allocation empirically with the discrete-event simulator.
    Simulate {
        /// Total exogenous arrivals to generate.
        #[arg(long, default_value_t = 100_000)]
        horizon: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        replications: u32,
        /// Fraction of the horizon discarded as warmup.
        #[arg(long, default_value_t = 0.2)]
        warmup: f64,
        /// Local service rates, comma separated; golden-rule rates when
        /// omitted.
        #[arg(long, value_delimiter = ',')]
        mu0: Option<Vec<f64>>,
    },
    /// Run the round-based peer harness and compare with the direct solve.
    Distributed {
        /// Round-over-round convergence tolerance.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_rounds: usize,
        /// Print one trace record per round to standard error.
        #[arg(long)]
        trace: bool,
        /// Seed a random initial eigenvector instead of all ones.
        #[arg(long)]
        v0_seed: Option<u64>,
    },
}

/// Parses arguments from the process environment and runs; returns the exit
/// code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses exit code 2 for usage errors, 0 for --help/--version
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    run_cli(cli)
}

fn run_cli(cli: Cli) -> i32 {
    let input_path = match &cli.input {
        Some(p) => p.clone(),
        None => {
            eprintln!("error: --input <PATH> is required");
            return 2;
        }
    };
    let text = match std::fs::read_to_string(&input_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", input_path.display());
            return 2;
        }
    };
    let spec = match SpecFile::parse(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };

    let input_name = input_path.display().to_string();
    let (report, code) = match &cli.command {
        Command::Validate => cmd_validate(&spec, &input_name),
        Command::Solve { tol, max_iters } => cmd_solve(&spec, &input_name, *tol, *max_iters),
        Command::Allocate { feasibility, margin } => {
            cmd_allocate(&spec, &input_name, *feasibility, *margin)
        }
        Command::Simulate { horizon, seed, replications, warmup, mu0 } => cmd_simulate(
            &spec,
            &input_name,
            *horizon,
            *seed,
            *replications,
            *warmup,
            mu0.clone(),
        ),
        Command::Distributed { tol, max_rounds, trace, v0_seed } => {
            cmd_distributed(&spec, &input_name, *tol, *max_rounds, *trace, *v0_seed)
        }
    };

    let rendered = match cli.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    match &cli.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, rendered) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return 2;
            }
        }
        None => println!("{rendered}"),
    }
    code
}

fn fail(mut report: Report, err: &Error) -> (Report, i32) {
    report.error = Some(ErrorInfo { code: err.code().to_string(), message: err.to_string() });
    (report, 1)
}

/// Validation gate shared by the computing subcommands.
fn gate(spec: &NetworkSpec, report: &mut Report) -> Option<i32> {
    match validate_spec(spec) {
        Ok(validation) => {
            let ok = validation.ok;
            report.validation = Some(validation);
            if ok {
                None
            } else {
                report.error = Some(ErrorInfo {
                    code: "VALIDATION_FAILED".into(),
                    message: "spec violates structural invariants; see validation section".into(),
                });
                Some(1)
            }
        }
        Err(e) => {
            report.error = Some(ErrorInfo { code: e.code().into(), message: e.to_string() });
            Some(2)
        }
    }
}

fn cmd_validate(spec: &NetworkSpec, input: &str) -> (Report, i32) {
    let manifest = RunManifest::new("validate", input, json!({}));
    let mut report = Report::new(manifest);
    match validate_spec(spec) {
        Ok(validation) => {
            let code = if validation.ok { 0 } else { 1 };
            report.validation = Some(validation);
            (report, code)
        }
        Err(e) => {
            report.error = Some(ErrorInfo { code: e.code().into(), message: e.to_string() });
            (report, 2)
        }
    }
}

fn cmd_solve(spec: &NetworkSpec, input: &str, tol: f64, max_iters: usize) -> (Report, i32) {
    let manifest =
        RunManifest::new("solve", input, json!({ "tol": tol, "max_iters": max_iters }));
    let mut report = Report::new(manifest);
    if let Some(code) = gate(spec, &mut report) {
        return (report, code);
    }
    let flow = match solve_flow_balance(spec) {
        Ok(flow) => flow,
        Err(e) => return fail(report, &e),
    };
    let eigen = perron_eigenpair(&flow.b_tilde, &PowerOptions { tol, max_iters });
    report.flow = Some(flow);
    match eigen {
        Ok(pair) => {
            report.eigen = Some(pair);
            (report, 0)
        }
        Err(e) => fail(report, &e),
    }
}

fn cmd_allocate(
    spec: &NetworkSpec,
    input: &str,
    feasibility: Feasibility,
    margin: f64,
) -> (Report, i32) {
    let manifest = RunManifest::new(
        "allocate",
        input,
        json!({ "feasibility": format!("{feasibility:?}").to_lowercase(), "margin": margin }),
    );
    let mut report = Report::new(manifest);
    if let Some(code) = gate(spec, &mut report) {
        return (report, code);
    }
    let options = PipelineOptions {
        feasibility: match feasibility {
            Feasibility::Fail => FeasibilityAction::Fail,
            Feasibility::Augment => FeasibilityAction::Augment,
            Feasibility::Thin => FeasibilityAction::Thin,
        },
        margin,
        power: PowerOptions::default(),
    };
    match golden_rule_pipeline(spec, &options) {
        Ok(out) => {
            report.flow = Some(out.flow);
            report.eigen = Some(out.eigen);
            report.allocation = Some(out.allocation);
            report.queue_stats = Some(out.stats);
            (report, 0)
        }
        Err(e) => fail(report, &e),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    spec: &NetworkSpec,
    input: &str,
    horizon: u64,
    seed: u64,
    replications: u32,
    warmup: f64,
    mu0: Option<Vec<f64>>,
) -> (Report, i32) {
    let manifest = RunManifest::new(
        "simulate",
        input,
        json!({
            "horizon": horizon,
            "seed": seed,
            "replications": replications,
            "warmup": warmup,
            "mu0": mu0,
        }),
    );
    let mut report = Report::new(manifest);
    if let Some(code) = gate(spec, &mut report) {
        return (report, code);
    }

    let (mu0, alpha) = match mu0 {
        Some(split) => (split, None),
        None => match golden_rule_pipeline(spec, &PipelineOptions::default()) {
            Ok(out) => {
                report.flow = Some(out.flow);
                report.eigen = Some(out.eigen);
                let mu0 = out.allocation.mu0.clone();
                let alpha = out.allocation.alpha.clone();
                report.allocation = Some(out.allocation);
                report.queue_stats = Some(out.stats);
                (mu0, Some(alpha))
            }
            Err(e) => return fail(report, &e),
        },
    };

    let config = SimConfig { spec: spec.clone(), mu0, alpha, horizon, warmup, seed, replications };
    match simulate(&config) {
        Ok(sim) => {
            report.simulation = Some(sim);
            (report, 0)
        }
        Err(e) => fail(report, &e),
    }
}

fn cmd_distributed(
    spec: &NetworkSpec,
    input: &str,
    tol: f64,
    max_rounds: usize,
    trace: bool,
    v0_seed: Option<u64>,
) -> (Report, i32) {
    let manifest = RunManifest::new(
        "distributed",
        input,
        json!({ "tol": tol, "max_rounds": max_rounds, "trace": trace, "v0_seed": v0_seed }),
    );
    let mut report = Report::new(manifest);
    if let Some(code) = gate(spec, &mut report) {
        return (report, code);
    }

    let options = RunOptions {
        tol,
        max_rounds,
        v0: match v0_seed {
            Some(seed) => InitialVector::Seeded(seed),
            None => InitialVector::Ones,
        },
        collect_trace: trace,
    };
    let run = match run_until_converged(spec, &options) {
        Ok(run) => run,
        Err(e) => return fail(report, &e),
    };
    if trace {
        for record in &run.trace {
            eprintln!("{}", serde_json::to_string(record).expect("trace serializes"));
        }
    }

    let flow = match solve_flow_balance(spec) {
        Ok(flow) => flow,
        Err(e) => return fail(report, &e),
    };
    let eigen = match perron_eigenpair(&flow.b_tilde, &PowerOptions::default()) {
        Ok(pair) => pair,
        Err(e) => return fail(report, &e),
    };
    let lambda_run = match flow_balance_rounds(spec, tol, max_rounds.max(1)) {
        Ok(r) => r,
        Err(e) => return fail(report, &e),
    };

    report.distributed = Some(DistributedReport {
        converged: true,
        rounds_used: run.rounds_used,
        message_count: run.message_count,
        b_error_vs_direct: run.b.max_abs_diff(&flow.b),
        v_error_vs_direct: linf_diff(&run.v, &eigen.v),
        b: run.b,
        v: run.v,
        lambda: lambda_run.lambda,
        lambda_rounds: lambda_run.rounds_used,
        lambda_messages: lambda_run.message_count,
        trace: Vec::new(),
    });
    report.flow = Some(flow);
    report.eigen = Some(eigen);
    (report, 0)
}
