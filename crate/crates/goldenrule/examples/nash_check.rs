//! First-order check that the closed-form split really is each peer's best
//! response: the disutility slope vanishes at the split and curves upward.
//!
//! ```bash
//! cargo run --example nash_check
//! ```

use goldenrule::allocation::{
    disutility_derivative_check, golden_rule_pipeline, PipelineOptions,
};
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

    println!("central differences of each peer's disutility at its split:");
    for i in 0..spec.n {
        let (d1, d2) = disutility_derivative_check(
            &out.spec,
            &out.flow,
            &out.allocation.alpha,
            i,
            out.allocation.mu0[i],
            1e-5,
        )
        .unwrap();
        println!("  peer {}: slope {d1:+.3e}, curvature {d2:+.4}", i + 1);
    }

    println!("\nslope away from the optimum (peer 1):");
    for offset in [-0.2, -0.1, 0.1, 0.2, 0.5] {
        let (d1, _) = disutility_derivative_check(
            &out.spec,
            &out.flow,
            &out.allocation.alpha,
            0,
            out.allocation.mu0[0] + offset,
            1e-5,
        )
        .unwrap();
        println!("  mu0 {offset:+.1}: slope {d1:+.5}");
    }
}
