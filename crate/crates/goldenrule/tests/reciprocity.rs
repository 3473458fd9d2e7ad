//! Reciprocity checks beyond the acceptance suite: a deliberately perturbed
//! altruism weight must stick out of the proportionality table, first in the
//! analytic recomputation and then in the simulated one.

mod common;

use common::three_peer_spec;
use goldenrule::allocation::{
    golden_rule_pipeline, nash_mu0, queue_stats, GoldenRuleAllocation, PipelineOptions,
};
use goldenrule::jackson::{simulate, verify_golden_rule, SimConfig};

/// Analytic delay ratios under an arbitrary split: delay collected elsewhere
/// over the delay factor imposed at home, straight from the foreign delays.
fn analytic_ratios(
    flow: &goldenrule::FlowSolution,
    foreign_delay: &[f64],
) -> Vec<f64> {
    let n = foreign_delay.len();
    (0..n)
        .map(|i| {
            let rest: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| flow.b.get(i, j) * foreign_delay[j])
                .sum();
            rest / foreign_delay[i]
        })
        .collect()
}

#[test]
fn doubled_altruism_breaks_the_common_constant() {
    let spec = three_peer_spec();
    let out = golden_rule_pipeline(&spec, &PipelineOptions::default()).unwrap();
    let kappa = out.eigen.kappa;

    let mut alpha = out.allocation.alpha.clone();
    alpha[0] *= 2.0;
    let mu0 = nash_mu0(&out.spec, &out.flow, &alpha).unwrap();
    let stats = queue_stats(&out.spec, &out.flow, &mu0, &alpha).unwrap();

    // analytic recomputation: peer 1's ratio departs from kappa further than
    // anyone else's
    let ratios = analytic_ratios(&out.flow, &stats.foreign_delay);
    let dev: Vec<f64> = ratios.iter().map(|r| (r - kappa).abs()).collect();
    assert!(
        dev[0] > dev[1] && dev[0] > dev[2],
        "deviations {dev:?} do not single out the perturbed peer"
    );
    assert!(dev[0] / kappa > 0.03, "perturbation too subtle to matter: {dev:?}");

    // and the balanced allocation stays balanced
    let balanced =
        analytic_ratios(&out.flow, &queue_stats(&out.spec, &out.flow, &out.allocation.mu0, &out.allocation.alpha)
            .unwrap()
            .foreign_delay);
    for r in &balanced {
        assert!((r - kappa).abs() / kappa < 1e-9);
    }

    // empirically: simulate under the perturbed split and compare tables
    let perturbed_alloc = GoldenRuleAllocation {
        alpha: alpha.clone(),
        mu_foreign: out.spec.mu.iter().zip(&mu0).map(|(m, m0)| m - m0).collect(),
        mu0: mu0.clone(),
        kappa,
    };
    let config = SimConfig {
        spec: out.spec.clone(),
        mu0,
        alpha: Some(alpha),
        horizon: 1_000_000,
        warmup: 0.2,
        seed: 0xa1fa_0001,
        replications: 1,
    };
    let report = simulate(&config).unwrap();
    let table = verify_golden_rule(&report, &out.flow, &perturbed_alloc);
    let emp_dev: Vec<f64> = table.ratios.iter().map(|r| (r - kappa).abs()).collect();
    assert!(
        emp_dev[0] > emp_dev[1] && emp_dev[0] > emp_dev[2],
        "empirical deviations {emp_dev:?} do not single out the perturbed peer"
    );
    // the empirical table tracks the analytic one
    for (emp, ana) in table.ratios.iter().zip(&ratios) {
        assert!((emp - ana).abs() / ana < 0.05, "{emp} vs analytic {ana}");
    }
}

#[test]
fn same_seed_same_table() {
    let spec = three_peer_spec();
    let out = golden_rule_pipeline(&spec, &PipelineOptions::default()).unwrap();
    let config = SimConfig {
        spec: out.spec.clone(),
        mu0: out.allocation.mu0.clone(),
        alpha: Some(out.allocation.alpha.clone()),
        horizon: 50_000,
        warmup: 0.2,
        seed: 9,
        replications: 2,
    };
    let a = verify_golden_rule(&simulate(&config).unwrap(), &out.flow, &out.allocation);
    let b = verify_golden_rule(&simulate(&config).unwrap(), &out.flow, &out.allocation);
    assert_eq!(a.ratios, b.ratios);
    assert_eq!(a.max_rel_deviation, b.max_rel_deviation);
}
