//! Flow balance: the expected-visit matrix B = (I - R)^{-1}, the total loads,
//! and the series partial sums converging to the same answer.
//!
//! ```bash
//! cargo run --example flow_balance
//! ```

use goldenrule::flowbalance::{neumann_b, solve_flow_balance};
use goldenrule::linalg::Matrix;
use goldenrule::model::NetworkSpec;

fn main() {
    let routing = Matrix::from_rows(&[
        vec![0.0, 2.0 / 6.0, 3.0 / 6.0],
        vec![2.0 / 6.0, 0.0, 3.0 / 6.0],
        vec![3.0 / 6.0, 1.0 / 6.0, 0.0],
    ]);
    let spec = NetworkSpec::new(routing, vec![1.0, 2.0, 1.0], vec![8.0, 7.0, 9.0]).unwrap();
    let flow = solve_flow_balance(&spec).unwrap();

    println!("B = (I - R)^-1:");
    for i in 0..spec.n {
        let row: Vec<String> = flow.b.row(i).iter().map(|x| format!("{x:7.4}")).collect();
        println!("  [{}]", row.join(", "));
    }
    println!("total loads: {:?}", flow.lambda_total);
    println!("local loads (own queries): {:?}",
        (0..spec.n).map(|i| flow.local_load(&spec, i)).collect::<Vec<_>>());
    println!("foreign loads: {:?}",
        (0..spec.n).map(|i| flow.foreign_load(&spec, i)).collect::<Vec<_>>());

    println!("\nseries partial sums approach B:");
    for terms in [1usize, 2, 4, 8, 16, 32, 64] {
        let err = neumann_b(&spec.routing, terms).max_abs_diff(&flow.b);
        println!("  {terms:3} terms: max error {err:.3e}");
    }
}
