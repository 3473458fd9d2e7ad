//! Spec validation: what a well-formed network looks like and which codes
//! come back when the structural hypotheses fail.
//!
//! ```bash
//! cargo run --example validate
//! ```

use goldenrule::linalg::Matrix;
use goldenrule::model::{validate_spec, NetworkSpec};

fn main() {
    // three peers forwarding to each other, sixths as probabilities
    let routing = Matrix::from_rows(&[
        vec![0.0, 2.0 / 6.0, 3.0 / 6.0],
        vec![2.0 / 6.0, 0.0, 3.0 / 6.0],
        vec![3.0 / 6.0, 1.0 / 6.0, 0.0],
    ]);
    let spec = NetworkSpec::new(routing, vec![1.0, 2.0, 1.0], vec![8.0, 7.0, 9.0]).unwrap();
    let report = validate_spec(&spec).unwrap();
    println!("three-peer network: ok = {}", report.ok);
    println!("resolution probabilities: {:?}", spec.resolution_probabilities());

    // a network whose forwarding graph is not strongly connected
    let disconnected = NetworkSpec::new(
        Matrix::from_rows(&[
            vec![0.0, 0.5, 0.0],
            vec![0.5, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ]),
        vec![1.0, 1.0, 1.0],
        vec![4.0, 4.0, 4.0],
    )
    .unwrap();
    let report = validate_spec(&disconnected).unwrap();
    println!("\ndisconnected network: ok = {}", report.ok);
    for v in &report.violations {
        println!("  {}: {}", v.code.as_str(), v.message);
    }

    // peers that never resolve anything: queries would circulate forever
    let stochastic = NetworkSpec::new(
        Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
        vec![1.0, 1.0],
        vec![4.0, 4.0],
    )
    .unwrap();
    let report = validate_spec(&stochastic).unwrap();
    println!("\nnever-resolving network: ok = {}", report.ok);
    for v in &report.violations {
        println!("  {}: {}", v.code.as_str(), v.message);
    }
}
