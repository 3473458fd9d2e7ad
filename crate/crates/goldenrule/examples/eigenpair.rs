//! The dominant eigenpair of the zero-diagonal visit matrix: the constant
//! every peer's reciprocity ratio will share, and the vector that prices each
//! peer's delay.
//!
//! ```bash
//! cargo run --example eigenpair
//! ```

#![allow(clippy::needless_range_loop)]

use goldenrule::flowbalance::solve_flow_balance;
use goldenrule::linalg::Matrix;
use goldenrule::model::NetworkSpec;
use goldenrule::spectral::{normalize, perron_eigenpair, PowerOptions};

fn main() {
    let routing = Matrix::from_rows(&[
        vec![0.0, 2.0 / 6.0, 3.0 / 6.0],
        vec![2.0 / 6.0, 0.0, 3.0 / 6.0],
        vec![3.0 / 6.0, 1.0 / 6.0, 0.0],
    ]);
    let spec = NetworkSpec::new(routing, vec![1.0, 2.0, 1.0], vec![8.0, 7.0, 9.0]).unwrap();
    let flow = solve_flow_balance(&spec).unwrap();

    let pair = perron_eigenpair(&flow.b_tilde, &PowerOptions::default()).unwrap();
    println!("kappa = {:.6}", pair.kappa);
    println!("v     = {:?}", pair.v);
    println!("converged in {} iterations, residual {:.3e}", pair.iterations, pair.residual);

    // the eigen-equation holds row by row
    let bv = flow.b_tilde.mat_vec(&pair.v);
    for i in 0..spec.n {
        println!("  (B~ v)[{i}] / v[{i}] = {:.12}", bv[i] / pair.v[i]);
    }

    // normalization is scale-invariant and fixes the sign
    let scaled: Vec<f64> = pair.v.iter().map(|x| -7.3 * x).collect();
    println!("renormalized from a scaled copy: {:?}", normalize(&scaled).unwrap());
}
