//! Closed-form allocation economics: analytic queue statistics, the
//! disutility each peer carries, the unique Nash split of service capacity,
//! the altruism parameters that make the equilibrium reciprocal, feasibility
//! repair, and the end-to-end pipeline tying it all together.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowbalance::{check_stability, solve_flow_balance, FlowSolution};
use crate::linalg::Matrix;
use crate::model::{validate_spec, NetworkSpec};
use crate::spectral::{perron_eigenpair, EigenPair, PowerOptions};

/// Relative tolerance for the reciprocity residual checked on every
/// successful pipeline run.
pub const RECIPROCITY_RESIDUAL_TOL: f64 = 1e-8;

/// A golden-rule service split: altruism weights and the induced division of
/// each peer's capacity between its local and foreign queues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenRuleAllocation {
    /// Altruism factor per peer.
    pub alpha: Vec<f64>,
    /// Local-queue service rate per peer.
    pub mu0: Vec<f64>,
    /// Foreign-queue service rate per peer, `mu - mu0`.
    pub mu_foreign: Vec<f64>,
    /// Proportionality constant carried from the eigenpair.
    pub kappa: f64,
}

/// Analytic steady-state queue statistics under a given split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    /// Mean number of peer `i`'s own queries queued at `i`.
    pub l_local: Vec<f64>,
    /// Mean number of queries in each peer's foreign-traffic queue.
    pub l_foreign: Vec<f64>,
    /// Entry `(i, j)`, `i != j`: mean number of origin-`i` queries in `j`'s
    /// foreign queue. The diagonal holds the local occupancy `l_local`.
    pub l_cross: Matrix,
    /// Mean delay of foreign traffic at each peer.
    pub foreign_delay: Vec<f64>,
    /// Disutility per peer: mean system time of its own traffic plus its
    /// altruism-weighted foreign delay.
    pub disutility: Vec<f64>,
}

/// Local-queue slack `mu0_i - b_ii lambda0_i`; must stay positive.
fn local_slack(spec: &NetworkSpec, flow: &FlowSolution, mu0: &[f64], i: usize) -> f64 {
    mu0[i] - flow.local_load(spec, i)
}

/// Foreign-queue slack `mu_i - mu0_i - (Lambda_i - b_ii lambda0_i)`.
fn foreign_slack(spec: &NetworkSpec, flow: &FlowSolution, mu0: &[f64], i: usize) -> f64 {
    spec.mu[i] - mu0[i] - flow.foreign_load(spec, i)
}

/// Analytic queue lengths, delays, and disutilities under the split `mu0`.
pub fn queue_stats(
    spec: &NetworkSpec,
    flow: &FlowSolution,
    mu0: &[f64],
    alpha: &[f64],
) -> Result<QueueStats> {
    let n = spec.n;
    if mu0.len() != n || alpha.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "mu0 has {}, alpha has {}, expected {n}",
            mu0.len(),
            alpha.len()
        )));
    }
    for i in 0..n {
        if local_slack(spec, flow, mu0, i) <= 0.0 {
            return Err(Error::Unstable(format!("local queue at peer {i} has no slack")));
        }
        if foreign_slack(spec, flow, mu0, i) <= 0.0 {
            return Err(Error::Unstable(format!("foreign queue at peer {i} has no slack")));
        }
    }

    let mut l_local = vec![0.0; n];
    let mut l_foreign = vec![0.0; n];
    let mut l_cross = Matrix::zeros(n, n);
    let mut foreign_delay = vec![0.0; n];
    for i in 0..n {
        l_local[i] = flow.local_load(spec, i) / local_slack(spec, flow, mu0, i);
        l_foreign[i] = flow.foreign_load(spec, i) / foreign_slack(spec, flow, mu0, i);
        foreign_delay[i] = 1.0 / foreign_slack(spec, flow, mu0, i);
        l_cross.set(i, i, l_local[i]);
    }
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let l =
                    flow.b.get(i, j) * spec.lambda0[i] / foreign_slack(spec, flow, mu0, j);
                l_cross.set(i, j, l);
            }
        }
    }

    let disutility =
        (0..n).map(|i| disutility_of(spec, flow, alpha[i], mu0, i).expect("slack checked")).collect();

    Ok(QueueStats { l_local, l_foreign, l_cross, foreign_delay, disutility })
}

/// Disutility of one peer under a split: per-visit form, which stays
/// well-defined even for peers with zero exogenous demand.
pub fn disutility_of(
    spec: &NetworkSpec,
    flow: &FlowSolution,
    alpha_i: f64,
    mu0: &[f64],
    i: usize,
) -> Result<f64> {
    let own_local = local_slack(spec, flow, mu0, i);
    if own_local <= 0.0 {
        return Err(Error::Unstable(format!("local queue at peer {i} has no slack")));
    }
    let mut cost = flow.b.get(i, i) / own_local;
    for j in 0..spec.n {
        let slack = foreign_slack(spec, flow, mu0, j);
        if slack <= 0.0 {
            return Err(Error::Unstable(format!("foreign queue at peer {j} has no slack")));
        }
        if j != i {
            cost += flow.b.get(i, j) / slack;
        } else {
            cost += alpha_i / slack;
        }
    }
    Ok(cost)
}

/// The unique Nash split of each peer's capacity between its two queues,
/// given altruism weights:
/// `mu0_i = sqrt(b_ii) / (sqrt(b_ii) + sqrt(alpha_i)) * (mu_i - Lambda_i) + b_ii lambda0_i`.
///
/// The result satisfies both stability inequalities by construction for any
/// positive altruism weights.
pub fn nash_mu0(spec: &NetworkSpec, flow: &FlowSolution, alpha: &[f64]) -> Result<Vec<f64>> {
    let n = spec.n;
    if alpha.len() != n {
        return Err(Error::DimensionMismatch(format!("alpha has {}, expected {n}", alpha.len())));
    }
    for (i, &a) in alpha.iter().enumerate() {
        if !(a > 0.0) {
            return Err(Error::InvalidConfig(format!("alpha[{i}] = {a} must be positive")));
        }
    }
    let mut mu0 = vec![0.0; n];
    for i in 0..n {
        let headroom = spec.mu[i] - flow.lambda_total[i];
        if headroom <= 0.0 {
            return Err(Error::InfeasibleCapacity(format!(
                "peer {i}: mu = {} does not exceed total load {}",
                spec.mu[i], flow.lambda_total[i]
            )));
        }
        let sb = flow.b.get(i, i).sqrt();
        let sa = alpha[i].sqrt();
        mu0[i] = sb / (sb + sa) * headroom + flow.local_load(spec, i);
    }
    debug_assert!(check_stability(spec, flow, &mu0).ok);
    Ok(mu0)
}

/// Altruism weights under which the Nash split is golden-rule reciprocal:
/// `alpha_i = b_ii (v_i (mu_i - Lambda_i) - 1)^{-2}`.
///
/// Feasible only when every peer's capacity clears `1/v_i + Lambda_i`; the
/// error lists each offending peer with its shortfall.
pub fn golden_alphas(
    flow: &FlowSolution,
    eig: &EigenPair,
    spec: &NetworkSpec,
) -> Result<Vec<f64>> {
    let shortfalls = feasibility_shortfalls(spec, flow, eig);
    if !shortfalls.is_empty() {
        return Err(Error::Infeasible { shortfalls });
    }
    Ok((0..spec.n)
        .map(|i| {
            let margin = eig.v[i] * (spec.mu[i] - flow.lambda_total[i]) - 1.0;
            flow.b.get(i, i) / (margin * margin)
        })
        .collect())
}

/// Peers violating `v_i (mu_i - Lambda_i) > 1`, with the capacity shortfall
/// `1/v_i + Lambda_i - mu_i` for each.
pub fn feasibility_shortfalls(
    spec: &NetworkSpec,
    flow: &FlowSolution,
    eig: &EigenPair,
) -> Vec<(usize, f64)> {
    (0..spec.n)
        .filter(|&i| eig.v[i] * (spec.mu[i] - flow.lambda_total[i]) <= 1.0)
        .map(|i| (i, 1.0 / eig.v[i] + flow.lambda_total[i] - spec.mu[i]))
        .collect()
}

/// How an infeasible spec should be repaired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeasibilityMode {
    /// Raise capacities to `(1 + margin) (1/v_i + Lambda_i)` where short.
    AugmentCapacity,
    /// Scale every exogenous rate by the largest uniform factor that keeps
    /// all peers feasible, shaved by `margin`.
    ThinDemand,
}

/// Returns a spec satisfying the feasibility condition, repaired according to
/// `mode`. The input is never mutated; already-sufficient values are kept.
pub fn ensure_feasible(
    spec: &NetworkSpec,
    flow: &FlowSolution,
    eig: &EigenPair,
    mode: FeasibilityMode,
    margin: f64,
) -> Result<NetworkSpec> {
    let mut out = spec.clone();
    match mode {
        FeasibilityMode::AugmentCapacity => {
            for i in 0..spec.n {
                let required = (1.0 + margin) * (1.0 / eig.v[i] + flow.lambda_total[i]);
                out.mu[i] = spec.mu[i].max(required);
            }
        }
        FeasibilityMode::ThinDemand => {
            let mut theta: f64 = 1.0;
            for i in 0..spec.n {
                let headroom = spec.mu[i] - 1.0 / eig.v[i];
                if headroom <= 0.0 {
                    return Err(Error::ThinningImpossible(format!(
                        "peer {i}: mu = {} does not even cover 1/v = {}",
                        spec.mu[i],
                        1.0 / eig.v[i]
                    )));
                }
                if flow.lambda_total[i] > 0.0 {
                    theta = theta.min((1.0 - margin) * headroom / flow.lambda_total[i]);
                }
            }
            let theta = theta.min(1.0);
            if theta < 1.0 {
                for l in &mut out.lambda0 {
                    *l *= theta;
                }
            }
        }
    }
    Ok(out)
}

/// Pipeline behavior when the feasibility condition fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeasibilityAction {
    /// Capacity changes are operator decisions: stop with the shortfall list.
    Fail,
    Augment,
    Thin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub feasibility: FeasibilityAction,
    /// Safety margin applied by the repair modes.
    pub margin: f64,
    pub power: PowerOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { feasibility: FeasibilityAction::Fail, margin: 0.05, power: PowerOptions::default() }
    }
}

/// Everything the pipeline produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineOutput {
    /// The spec the allocation applies to; differs from the input only when a
    /// repair mode adjusted it.
    pub spec: NetworkSpec,
    pub adjusted: bool,
    pub flow: FlowSolution,
    pub eigen: EigenPair,
    pub allocation: GoldenRuleAllocation,
    pub stats: QueueStats,
}

/// Runs the whole golden-rule procedure: flow balance, the eigenpair, the
/// feasibility gate, altruism weights, the Nash split, and the analytic queue
/// report. Errors carry the stage that raised them.
pub fn golden_rule_pipeline(
    spec: &NetworkSpec,
    options: &PipelineOptions,
) -> Result<PipelineOutput> {
    let report = validate_spec(spec).map_err(|e| e.at_stage("validate"))?;
    if !report.ok {
        let codes: Vec<&str> = report.violations.iter().map(|v| v.code.as_str()).collect();
        return Err(Error::InvalidConfig(format!("spec fails validation: {}", codes.join(", ")))
            .at_stage("validate"));
    }
    if spec.n < 2 {
        return Err(Error::Degenerate(
            "a one-peer network has no foreign traffic to reciprocate".into(),
        )
        .at_stage("validate"));
    }

    let flow = solve_flow_balance(spec).map_err(|e| e.at_stage("flow"))?;
    let eigen = perron_eigenpair(&flow.b_tilde, &options.power).map_err(|e| e.at_stage("eigen"))?;

    let (spec, adjusted, flow, eigen) = match options.feasibility {
        FeasibilityAction::Fail => {
            let shortfalls = feasibility_shortfalls(spec, &flow, &eigen);
            if !shortfalls.is_empty() {
                return Err(Error::Infeasible { shortfalls }.at_stage("feasible"));
            }
            (spec.clone(), false, flow, eigen)
        }
        FeasibilityAction::Augment | FeasibilityAction::Thin => {
            let mode = if options.feasibility == FeasibilityAction::Augment {
                FeasibilityMode::AugmentCapacity
            } else {
                FeasibilityMode::ThinDemand
            };
            let repaired = ensure_feasible(spec, &flow, &eigen, mode, options.margin)
                .map_err(|e| e.at_stage("feasible"))?;
            let adjusted = repaired != *spec;
            // demand thinning changes the loads; recompute the chain on the
            // repaired spec (v depends only on routing and is unchanged)
            let flow = solve_flow_balance(&repaired).map_err(|e| e.at_stage("flow"))?;
            let eigen =
                perron_eigenpair(&flow.b_tilde, &options.power).map_err(|e| e.at_stage("eigen"))?;
            (repaired, adjusted, flow, eigen)
        }
    };

    let alpha = golden_alphas(&flow, &eigen, &spec).map_err(|e| e.at_stage("alpha"))?;
    let mu0 = nash_mu0(&spec, &flow, &alpha).map_err(|e| e.at_stage("nash"))?;
    let mu_foreign: Vec<f64> = spec.mu.iter().zip(&mu0).map(|(m, m0)| m - m0).collect();
    let stats = queue_stats(&spec, &flow, &mu0, &alpha).map_err(|e| e.at_stage("stats"))?;

    let allocation = GoldenRuleAllocation { alpha, mu0, mu_foreign, kappa: eigen.kappa };
    debug_assert!(max_reciprocity_deviation(&spec, &flow, &allocation) <= RECIPROCITY_RESIDUAL_TOL);

    Ok(PipelineOutput { spec, adjusted, flow, eigen, allocation, stats })
}

/// Eigenvector reconstructed from an allocation via
/// `v_i = (1 + sqrt(b_ii / alpha_i)) / (mu_i - Lambda_i)`.
pub fn reconstructed_eigenvector(
    spec: &NetworkSpec,
    flow: &FlowSolution,
    alpha: &[f64],
) -> Vec<f64> {
    (0..spec.n)
        .map(|i| {
            (1.0 + (flow.b.get(i, i) / alpha[i]).sqrt())
                / (spec.mu[i] - flow.lambda_total[i])
        })
        .collect()
}

/// Per-peer reciprocity ratios: delay a peer's traffic collects in the rest
/// of the network over the delay factor it imposes at home. Under a
/// golden-rule allocation all entries equal `kappa`.
pub fn reciprocity_ratios(
    spec: &NetworkSpec,
    flow: &FlowSolution,
    alloc: &GoldenRuleAllocation,
) -> Vec<f64> {
    let v = reconstructed_eigenvector(spec, flow, &alloc.alpha);
    (0..spec.n)
        .map(|i| {
            let rest: f64 =
                (0..spec.n).filter(|&j| j != i).map(|j| flow.b.get(i, j) * v[j]).sum();
            rest / v[i]
        })
        .collect()
}

/// Largest relative deviation of the reciprocity ratios from `kappa`.
pub fn max_reciprocity_deviation(
    spec: &NetworkSpec,
    flow: &FlowSolution,
    alloc: &GoldenRuleAllocation,
) -> f64 {
    reciprocity_ratios(spec, flow, alloc)
        .iter()
        .fold(0.0, |acc, r| acc.max((r - alloc.kappa).abs() / alloc.kappa))
}

/// Central finite differences of peer `i`'s disutility in its own local rate,
/// holding every other peer at the Nash split for the given altruism weights.
/// Returns the first- and second-derivative estimates.
pub fn disutility_derivative_check(
    spec: &NetworkSpec,
    flow: &FlowSolution,
    alpha: &[f64],
    i: usize,
    mu0_i: f64,
    h: f64,
) -> Result<(f64, f64)> {
    let mut mu0 = nash_mu0(spec, flow, alpha)?;
    let mut at = |x: f64| -> Result<f64> {
        mu0[i] = x;
        disutility_of(spec, flow, alpha[i], &mu0, i)
    };
    let lo = at(mu0_i - h)?;
    let mid = at(mu0_i)?;
    let hi = at(mu0_i + h)?;
    Ok(((hi - lo) / (2.0 * h), (hi - 2.0 * mid + lo) / (h * h)))
}
