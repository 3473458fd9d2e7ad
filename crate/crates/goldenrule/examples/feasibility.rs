//! Feasibility planning: the per-peer capacity threshold 1/v + Lambda, and
//! the two repair modes when a capacity falls short — raising capacity or
//! thinning demand.
//!
//! ```bash
//! cargo run --example feasibility
//! ```

use goldenrule::allocation::{ensure_feasible, feasibility_shortfalls, FeasibilityMode};
use goldenrule::flowbalance::solve_flow_balance;
use goldenrule::linalg::Matrix;
use goldenrule::model::NetworkSpec;
use goldenrule::spectral::{perron_eigenpair, PowerOptions};

fn main() {
    let routing = Matrix::from_rows(&[
        vec![0.0, 2.0 / 6.0, 3.0 / 6.0],
        vec![2.0 / 6.0, 0.0, 3.0 / 6.0],
        vec![3.0 / 6.0, 1.0 / 6.0, 0.0],
    ]);
    // peer 1's capacity is deliberately short
    let spec = NetworkSpec::new(routing, vec![1.0, 2.0, 1.0], vec![7.5, 7.0, 9.0]).unwrap();
    let flow = solve_flow_balance(&spec).unwrap();
    let eig = perron_eigenpair(&flow.b_tilde, &PowerOptions::default()).unwrap();

    println!("capacity thresholds 1/v + Lambda:");
    for i in 0..spec.n {
        let threshold = 1.0 / eig.v[i] + flow.lambda_total[i];
        let verdict = if spec.mu[i] > threshold { "ok" } else { "SHORT" };
        println!("  peer {}: mu = {:.3} vs {:.4}  {}", i + 1, spec.mu[i], threshold, verdict);
    }
    for (peer, gap) in feasibility_shortfalls(&spec, &flow, &eig) {
        println!("shortfall at peer {}: {:.4}", peer + 1, gap);
    }

    let augmented =
        ensure_feasible(&spec, &flow, &eig, FeasibilityMode::AugmentCapacity, 0.05).unwrap();
    println!("\naugment-capacity (5% margin): mu = {:?}", augmented.mu);

    let thinned = ensure_feasible(&spec, &flow, &eig, FeasibilityMode::ThinDemand, 0.01).unwrap();
    println!("thin-demand (1% margin): lambda0 = {:?}", thinned.lambda0);
    let theta = thinned.lambda0[0] / spec.lambda0[0];
    println!("uniform thinning factor: {theta:.6}");
}
