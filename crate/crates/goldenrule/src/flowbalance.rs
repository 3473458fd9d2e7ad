//! Traffic (flow-balance) equations: the expected-visit matrix
//! `B = (I - R)^{-1}`, its zero-diagonal companion, the total per-peer loads,
//! and the queue-stability conditions a service split has to satisfy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lu_factor, Matrix};
use crate::model::{NetworkSpec, ValidationReport, Violation, ViolationCode};

/// Pivot threshold (relative to the largest entry of `I - R`) below which the
/// flow-balance system is declared singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Solution of the flow-balance equations for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSolution {
    /// Expected visit counts: entry `(i, j)` is the mean number of visits a
    /// query born at `i` pays to peer `j` before leaving the network.
    pub b: Matrix,
    /// `b` with the diagonal zeroed: visits paid to *other* peers.
    pub b_tilde: Matrix,
    /// Total arrival rate per peer, exogenous plus forwarded.
    pub lambda_total: Vec<f64>,
    /// Resolution probability per peer.
    pub r0: Vec<f64>,
}

impl FlowSolution {
    /// Rate of peer `i`'s own queries arriving at its local queue.
    pub fn local_load(&self, spec: &NetworkSpec, i: usize) -> f64 {
        self.b.get(i, i) * spec.lambda0[i]
    }

    /// Rate of other peers' queries arriving at `i`'s foreign queue.
    pub fn foreign_load(&self, spec: &NetworkSpec, i: usize) -> f64 {
        self.lambda_total[i] - self.local_load(spec, i)
    }
}

/// Solves the flow-balance equations by direct LU elimination.
///
/// Callers are expected to have validated the spec; a row-sum-one component
/// that slipped through surfaces here as [`Error::SingularSystem`].
pub fn solve_flow_balance(spec: &NetworkSpec) -> Result<FlowSolution> {
    spec.check_dimensions()?;
    let n = spec.n;
    let mut i_minus_r = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            i_minus_r.set(i, j, i_minus_r.get(i, j) - spec.routing.get(i, j));
        }
    }
    let factors = lu_factor(&i_minus_r, PIVOT_TOL).map_err(|s| {
        Error::SingularSystem(format!(
            "pivot {:.3e} at column {} of I - R is below {:.1e} x max entry",
            s.pivot, s.column, PIVOT_TOL
        ))
    })?;
    let b = factors.inverse();
    let lambda_total = b.vec_mat(&spec.lambda0);
    let b_tilde = b.zero_diagonal();
    let r0 = spec.resolution_probabilities();

    debug_assert!({
        let residual = residual_inf(&spec.lambda0, &lambda_total, &spec.routing);
        residual <= 1e-10 * lambda_total.iter().fold(1.0_f64, |a, &x| a.max(x.abs()))
    });

    Ok(FlowSolution { b, b_tilde, lambda_total, r0 })
}

/// L-inf residual of `Lambda^T (I - R) = lambda0^T`.
pub fn residual_inf(lambda0: &[f64], lambda_total: &[f64], routing: &Matrix) -> f64 {
    let n = lambda0.len();
    let mut worst = 0.0_f64;
    for j in 0..n {
        let mut lhs = lambda_total[j];
        for (i, &lt) in lambda_total.iter().enumerate() {
            lhs -= lt * routing.get(i, j);
        }
        worst = worst.max((lhs - lambda0[j]).abs());
    }
    worst
}

/// Partial sum `I + R + R^2 + ... + R^terms` of the visit-count series.
///
/// Entrywise non-decreasing in `terms` and convergent to `B` whenever the
/// routing matrix is strictly sub-stochastic. Kept as a cross-check for the
/// direct solve and as the conceptual basis of the round-based harness.
pub fn neumann_b(routing: &Matrix, terms: usize) -> Matrix {
    assert!(routing.is_square());
    let n = routing.n_rows();
    let mut sum = Matrix::identity(n);
    for _ in 0..terms {
        // sum <- I + sum * R reproduces the partial sums exactly
        let mut next = sum.matmul(routing);
        for i in 0..n {
            next.set(i, i, next.get(i, i) + 1.0);
        }
        sum = next;
    }
    sum
}

/// Verifies both stability conditions for the proposed local service rates:
/// the local queue needs `mu0_i > b_ii lambda0_i` and the foreign queue needs
/// `mu_i - mu0_i > Lambda_i - b_ii lambda0_i`, strictly.
pub fn check_stability(spec: &NetworkSpec, flow: &FlowSolution, mu0: &[f64]) -> ValidationReport {
    assert_eq!(mu0.len(), spec.n, "mu0 must have one rate per peer");
    let mut violations = Vec::new();
    for i in 0..spec.n {
        let local = flow.local_load(spec, i);
        let foreign = flow.foreign_load(spec, i);
        if !(mu0[i] > local) {
            violations.push(Violation {
                code: ViolationCode::LocalUnstable,
                peer: Some(i),
                message: format!("mu0[{i}] = {} does not exceed local load {local}", mu0[i]),
            });
        }
        if !(spec.mu[i] - mu0[i] > foreign) {
            violations.push(Violation {
                code: ViolationCode::ForeignUnstable,
                peer: Some(i),
                message: format!(
                    "mu[{i}] - mu0[{i}] = {} does not exceed foreign load {foreign}",
                    spec.mu[i] - mu0[i]
                ),
            });
        }
    }
    ValidationReport::new(violations, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ViolationCode;

    fn three_peer_spec() -> NetworkSpec {
        let routing = Matrix::from_rows(&[
            vec![0.0, 2.0 / 6.0, 3.0 / 6.0],
            vec![2.0 / 6.0, 0.0, 3.0 / 6.0],
            vec![3.0 / 6.0, 1.0 / 6.0, 0.0],
        ]);
        NetworkSpec::new(routing, vec![1.0, 2.0, 1.0], vec![8.0, 7.0, 9.0]).unwrap()
    }

    /// Exact inverse of I - R for the three-peer network, in sixteenths.
    fn three_peer_exact_b() -> Matrix {
        Matrix::from_rows(&[
            vec![33.0 / 16.0, 15.0 / 16.0, 24.0 / 16.0],
            vec![21.0 / 16.0, 27.0 / 16.0, 24.0 / 16.0],
            vec![20.0 / 16.0, 12.0 / 16.0, 32.0 / 16.0],
        ])
    }

    #[test]
    fn three_peer_b_matches_exact_values() {
        let flow = solve_flow_balance(&three_peer_spec()).unwrap();
        assert!(flow.b.max_abs_diff(&three_peer_exact_b()) < 1e-12);
        // printed three-decimal values from the worked example
        let printed = Matrix::from_rows(&[
            vec![2.062, 0.937, 1.500],
            vec![1.312, 1.687, 1.500],
            vec![1.250, 0.750, 2.000],
        ]);
        assert!(flow.b.max_abs_diff(&printed) <= 5e-4 + 1e-12);
    }

    #[test]
    fn three_peer_loads_are_exact_sixteenths() {
        let flow = solve_flow_balance(&three_peer_spec()).unwrap();
        let expected = [95.0 / 16.0, 81.0 / 16.0, 104.0 / 16.0];
        for (got, want) in flow.lambda_total.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert_eq!(expected, [5.9375, 5.0625, 6.5]);
    }

    #[test]
    fn identity_case_when_routing_is_zero() {
        // validation would flag this reducible network; the solver itself is
        // exercised directly
        let spec =
            NetworkSpec::new(Matrix::zeros(3, 3), vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0])
                .unwrap();
        let flow = solve_flow_balance(&spec).unwrap();
        assert!(flow.b.max_abs_diff(&Matrix::identity(3)) == 0.0);
        assert_eq!(flow.lambda_total, spec.lambda0);
    }

    #[test]
    fn stochastic_routing_is_singular() {
        let routing = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let spec = NetworkSpec::new(routing, vec![1.0, 1.0], vec![4.0, 4.0]).unwrap();
        assert!(matches!(solve_flow_balance(&spec), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn neumann_partial_sums() {
        let spec = three_peer_spec();
        assert_eq!(neumann_b(&spec.routing, 0), Matrix::identity(3));

        // one term: I + R, entrywise below B
        let one = neumann_b(&spec.routing, 1);
        let flow = solve_flow_balance(&spec).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 } + spec.routing.get(i, j);
                assert!((one.get(i, j) - expected).abs() < 1e-15);
                assert!(one.get(i, j) <= flow.b.get(i, j) + 1e-15);
            }
        }

        // spectral radius of R is at most 5/6, so 200 terms are plenty
        let converged = neumann_b(&spec.routing, 200);
        assert!(converged.max_abs_diff(&flow.b) < 1e-10);
    }

    #[test]
    fn neumann_converges_geometrically() {
        let spec = three_peer_spec();
        let b = solve_flow_balance(&spec).unwrap().b;
        let mut prev_err = f64::INFINITY;
        for terms in [1usize, 2, 4, 8, 16, 32, 64] {
            let err = neumann_b(&spec.routing, terms).max_abs_diff(&b);
            if prev_err.is_finite() && prev_err > 1e-13 {
                assert!(err < prev_err, "terms={terms}: {err} !< {prev_err}");
            }
            prev_err = err;
        }
    }

    #[test]
    fn stability_of_the_printed_split() {
        let spec = three_peer_spec();
        let flow = solve_flow_balance(&spec).unwrap();
        assert!(check_stability(&spec, &flow, &[2.43, 3.75, 2.32]).ok);
    }

    #[test]
    fn stability_requires_strict_inequality() {
        let spec = three_peer_spec();
        let flow = solve_flow_balance(&spec).unwrap();
        // exactly at the local boundary b_11 * lambda0_1 = 33/16
        let report = check_stability(&spec, &flow, &[33.0 / 16.0, 3.75, 2.32]);
        assert!(!report.ok);
        assert!(report.has(ViolationCode::LocalUnstable));
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].peer, Some(0));
    }

    #[test]
    fn foreign_queue_starved_by_greedy_local_split() {
        let spec = three_peer_spec();
        let flow = solve_flow_balance(&spec).unwrap();
        // foreign load at peer 1 is 95/16 - 33/16 = 62/16 = 3.875 > 8 - 7.99
        assert!((flow.foreign_load(&spec, 0) - 62.0 / 16.0).abs() < 1e-12);
        let report = check_stability(&spec, &flow, &[7.99, 3.75, 2.32]);
        assert!(report.has(ViolationCode::ForeignUnstable));
        assert_eq!(report.violations[0].peer, Some(0));
    }

    #[test]
    fn b_diagonal_at_least_one_and_loads_dominate_demand() {
        let spec = three_peer_spec();
        let flow = solve_flow_balance(&spec).unwrap();
        for i in 0..spec.n {
            assert!(flow.b.get(i, i) >= 1.0);
            assert!(flow.lambda_total[i] >= spec.lambda0[i]);
            assert_eq!(flow.b_tilde.get(i, i), 0.0);
        }
    }
}
