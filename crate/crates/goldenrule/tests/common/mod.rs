//! Helpers shared by the integration suites: the reference networks, the
//! pinned expectation files, and seeded random-network generators.
#![allow(dead_code)] // each test binary uses its own subset

use goldenrule::flowbalance::solve_flow_balance;
use goldenrule::linalg::Matrix;
use goldenrule::model::NetworkSpec;
use goldenrule::spectral::{perron_eigenpair, PowerOptions};

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;
use serde::Deserialize;
use std::path::PathBuf;

pub fn three_peer_spec() -> NetworkSpec {
    let routing = Matrix::from_rows(&[
        vec![0.0, 2.0 / 6.0, 3.0 / 6.0],
        vec![2.0 / 6.0, 0.0, 3.0 / 6.0],
        vec![3.0 / 6.0, 1.0 / 6.0, 0.0],
    ]);
    NetworkSpec::new(routing, vec![1.0, 2.0, 1.0], vec![8.0, 7.0, 9.0]).unwrap()
}

pub fn two_peer_spec() -> NetworkSpec {
    let routing = Matrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]);
    NetworkSpec::new(routing, vec![1.0, 1.0], vec![4.0, 4.0]).unwrap()
}

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Pinned expectations for the three-peer network.
#[derive(Debug, Deserialize)]
pub struct ThreePeerExpected {
    pub b_exact_sixteenths: Vec<Vec<f64>>,
    pub lambda_total: Vec<f64>,
    pub kappa: f64,
    pub v: Vec<f64>,
    pub printed: PrintedValues,
    pub rounded_chain: ChainValues,
    pub full_precision_chain: ChainValues,
}

#[derive(Debug, Deserialize)]
pub struct PrintedValues {
    pub b: Vec<Vec<f64>>,
    pub lambda_total: Vec<f64>,
    pub kappa: f64,
    pub v: Vec<f64>,
    pub feasibility_threshold: Vec<f64>,
    pub alpha: Vec<f64>,
    pub mu0: Vec<f64>,
    pub mu_foreign: Vec<f64>,
}

#[derive(Debug, Deserialize)]
pub struct ChainValues {
    pub alpha: Vec<f64>,
    pub mu0: Vec<f64>,
    pub mu_foreign: Vec<f64>,
    pub feasibility_threshold: Vec<f64>,
}

pub fn three_peer_expected() -> ThreePeerExpected {
    let text = std::fs::read_to_string(fixture_path("expected/three_peer.expected.json"))
        .expect("expected-values fixture");
    serde_json::from_str(&text).expect("expected-values fixture parses")
}

/// Random strictly sub-stochastic irreducible routing with row sums in
/// `[0.3, 0.8]`: a directed cycle guarantees strong connectivity, extra edges
/// keep the support dense enough for fast eigen convergence.
pub fn random_routing(rng: &mut Pcg64, n: usize) -> Matrix {
    let mut weights = Matrix::zeros(n, n);
    for i in 0..n {
        weights.set(i, (i + 1) % n, rng.random_range(0.2..1.0));
        for j in 0..n {
            if i != j && rng.random_range(0.0..1.0) < 0.7 {
                weights.set(i, j, rng.random_range(0.2..1.0));
            }
        }
    }
    let mut routing = Matrix::zeros(n, n);
    for i in 0..n {
        let row_sum: f64 = weights.row(i).iter().sum();
        let target = rng.random_range(0.3..0.8);
        for j in 0..n {
            routing.set(i, j, weights.get(i, j) / row_sum * target);
        }
    }
    routing
}

/// Random valid spec with positive demand everywhere; capacities are
/// placeholders until [`make_feasible`] sizes them.
pub fn random_spec(rng: &mut Pcg64, max_n: usize) -> NetworkSpec {
    let n = rng.random_range(2..=max_n);
    let routing = random_routing(rng, n);
    let lambda0 = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let mu = vec![1.0; n];
    NetworkSpec::new(routing, lambda0, mu).unwrap()
}

/// Sizes the capacities to clear the feasibility condition with a per-peer
/// margin in `[0.05, 0.5]`.
pub fn make_feasible(mut spec: NetworkSpec, rng: &mut Pcg64) -> NetworkSpec {
    let flow = solve_flow_balance(&spec).unwrap();
    let eig = perron_eigenpair(&flow.b_tilde, &PowerOptions::default()).unwrap();
    for i in 0..spec.n {
        let margin = rng.random_range(0.05..0.5);
        spec.mu[i] = (1.0 + margin) * (1.0 / eig.v[i] + flow.lambda_total[i]);
    }
    spec
}

pub fn seeded(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}
