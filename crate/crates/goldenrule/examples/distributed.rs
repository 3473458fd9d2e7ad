//! The round-based peer harness: every peer owns one routing row, exchanges
//! messages, and the collective converges to the same visit matrix and
//! eigenvector the direct solve produces — with the message bill attached.
//!
//! ```bash
//! cargo run --example distributed
//! ```

use goldenrule::distributed::{flow_balance_rounds, run_until_converged, RunOptions};
use goldenrule::flowbalance::solve_flow_balance;
use goldenrule::linalg::{linf_diff, Matrix};
use goldenrule::model::NetworkSpec;
use goldenrule::spectral::{perron_eigenpair, PowerOptions};

fn main() {
    let routing = Matrix::from_rows(&[
        vec![0.0, 2.0 / 6.0, 3.0 / 6.0],
        vec![2.0 / 6.0, 0.0, 3.0 / 6.0],
        vec![3.0 / 6.0, 1.0 / 6.0, 0.0],
    ]);
    let spec = NetworkSpec::new(routing, vec![1.0, 2.0, 1.0], vec![8.0, 7.0, 9.0]).unwrap();

    let options = RunOptions { collect_trace: true, ..RunOptions::default() };
    let run = run_until_converged(&spec, &options).unwrap();
    println!(
        "converged in {} rounds, {} messages exchanged",
        run.rounds_used, run.message_count
    );
    for record in run.trace.iter().step_by(10) {
        println!(
            "  round {:3}: b delta {:.3e}, v delta {:.3e}",
            record.round, record.max_b_delta, record.max_v_delta
        );
    }

    let flow = solve_flow_balance(&spec).unwrap();
    let eig = perron_eigenpair(&flow.b_tilde, &PowerOptions::default()).unwrap();
    println!("\nversus the direct solve:");
    println!("  max |B_distributed - B| = {:.3e}", run.b.max_abs_diff(&flow.b));
    println!("  max |v_distributed - v| = {:.3e}", linf_diff(&run.v, &eig.v));

    let loads = flow_balance_rounds(&spec, 1e-9, 10_000).unwrap();
    println!(
        "\ndistributed loads after {} rounds ({} messages): {:?}",
        loads.rounds_used, loads.message_count, loads.lambda
    );
}
