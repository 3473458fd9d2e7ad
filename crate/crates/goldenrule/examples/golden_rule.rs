//! The full pipeline: flow balance, eigenpair, altruism weights, the Nash
//! split, and the analytic queue report, with the reciprocity ratios that
//! show every peer ends up on the same constant.
//!
//! ```bash
//! cargo run --example golden_rule
//! ```

use goldenrule::allocation::{golden_rule_pipeline, reciprocity_ratios, PipelineOptions};
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
    println!("kappa = {:.6}", out.eigen.kappa);
    println!("peer  alpha      mu0      mu-mu0   foreign delay  disutility");
    for i in 0..spec.n {
        println!(
            "  {}   {:8.4}  {:7.4}  {:7.4}  {:10.4}  {:10.4}",
            i + 1,
            out.allocation.alpha[i],
            out.allocation.mu0[i],
            out.allocation.mu_foreign[i],
            out.stats.foreign_delay[i],
            out.stats.disutility[i],
        );
    }

    let ratios = reciprocity_ratios(&out.spec, &out.flow, &out.allocation);
    println!("\nreciprocity ratios (all equal kappa under the golden rule):");
    for (i, r) in ratios.iter().enumerate() {
        println!("  peer {}: {:.10}", i + 1, r);
    }

    println!("\nqueue occupancies (analytic):");
    println!("  local:   {:?}", out.stats.l_local);
    println!("  foreign: {:?}", out.stats.l_foreign);
}
