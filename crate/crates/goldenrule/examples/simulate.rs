//! Discrete-event validation: simulate the network of queues under the
//! golden-rule split and compare the measurements with the analytic values,
//! including the reciprocity ratios clustering around kappa.
//!
//! ```bash
//! cargo run --example simulate
//! ```

use goldenrule::allocation::{golden_rule_pipeline, PipelineOptions};
use goldenrule::jackson::{simulate, verify_golden_rule, SimConfig};
use goldenrule::linalg::Matrix;
use goldenrule::model::NetworkSpec;

fn main() {
    let routing = Matrix::from_rows(&[
        vec![0.0, 2.0 / 6.0, 3.0 / 6.0],
        vec![2.0 / 6.0, 0.0, 3.0 / 6.0],
        vec![3.0 / 6.0, 1.0 / 6.0, 0.0],
    ]);
    let spec = NetworkSpec::new(routing, vec![1.0, 2.0, 1.0], vec![8.0, 7.0, 9.0]).unwrap();
    let out = golden_rule_pipeline(&spec, &PipelineOptions::default()).unwrap();

    let config = SimConfig {
        spec: spec.clone(),
        mu0: out.allocation.mu0.clone(),
        alpha: Some(out.allocation.alpha.clone()),
        horizon: 200_000,
        warmup: 0.2,
        seed: 7,
        replications: 3,
    };
    let report = simulate(&config).unwrap();
    println!(
        "{} events across {} replications, mean horizon time {:.1}",
        report.event_count, report.replications, report.sim_time
    );

    println!("\nqueue          simulated           analytic");
    for i in 0..spec.n {
        println!(
            "  local {}    {:7.4} +- {:.4}    {:7.4}",
            i + 1,
            report.l_local[i].mean,
            report.l_local[i].se,
            out.stats.l_local[i]
        );
    }
    for i in 0..spec.n {
        println!(
            "  foreign {}  {:7.4} +- {:.4}    {:7.4}",
            i + 1,
            report.l_foreign[i].mean,
            report.l_foreign[i].se,
            out.stats.l_foreign[i]
        );
    }
    println!("\nforeign delays:");
    for i in 0..spec.n {
        println!(
            "  peer {}: {:.4} +- {:.4} simulated, {:.4} analytic",
            i + 1,
            report.foreign_delay[i].mean,
            report.foreign_delay[i].se,
            out.stats.foreign_delay[i]
        );
    }

    let table = verify_golden_rule(&report, &out.flow, &out.allocation);
    println!("\nreciprocity ratios (target kappa = {:.4}):", table.kappa);
    for (i, r) in table.ratios.iter().enumerate() {
        println!("  peer {}: {:.4}", i + 1, r);
    }
    println!("max relative deviation: {:.2}%", 100.0 * table.max_rel_deviation);
}
