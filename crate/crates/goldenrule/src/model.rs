//! Domain types for the network under study, with validation of the
//! structural hypotheses every downstream computation relies on: strict
//! sub-stochasticity of the routing matrix, irreducibility of its support
//! graph, and positivity of demand and capacity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Slack accepted on row sums before declaring `ROW_SUM_EXCEEDS_ONE`.
///
/// Input files carry rounded decimals; a row sum in `(1, 1 + ROW_SUM_TOL]` is
/// accepted with the resolution probability clamped to zero rather than
/// silently renormalized, which would corrupt fixtures.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Static snapshot of a peer-to-peer query network.
///
/// `routing` holds the forwarding probabilities: entry `(i, j)` is the
/// probability that a query serviced at peer `i` is forwarded to peer `j`.
/// The leftover mass of row `i` is the probability that `i` resolves the
/// query and it leaves the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Peer count.
    pub n: usize,
    /// `n x n` forwarding probabilities.
    pub routing: Matrix,
    /// Exogenous Poisson arrival rate per peer (queries/time).
    pub lambda0: Vec<f64>,
    /// Total service capacity per peer (queries/time).
    pub mu: Vec<f64>,
}

impl NetworkSpec {
    /// Builds a spec, rejecting shape mismatches outright.
    pub fn new(routing: Matrix, lambda0: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        let spec = Self { n: lambda0.len(), routing, lambda0, mu };
        spec.check_dimensions()?;
        Ok(spec)
    }

    pub(crate) fn check_dimensions(&self) -> Result<()> {
        if !self.routing.is_square()
            || self.routing.n_rows() != self.n
            || self.lambda0.len() != self.n
            || self.mu.len() != self.n
        {
            return Err(Error::DimensionMismatch(format!(
                "n={}, routing is {}x{}, lambda0 has {}, mu has {}",
                self.n,
                self.routing.n_rows(),
                self.routing.n_cols(),
                self.lambda0.len(),
                self.mu.len()
            )));
        }
        Ok(())
    }

    /// Per-peer resolution probabilities `1 - sum_j r_{i,j}`, clamped into
    /// `[0, 1]` so that row sums inside the accepted tolerance band do not
    /// produce tiny negative probabilities.
    pub fn resolution_probabilities(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let row_sum: f64 = self.routing.row(i).iter().sum();
                (1.0 - row_sum).clamp(0.0, 1.0)
            })
            .collect()
    }
}

/// Codes for individual invariant violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    NegativeEntry,
    RowSumExceedsOne,
    NotStrictlySubstochastic,
    NotIrreducible,
    ZeroDemand,
    NonpositiveCapacity,
    /// Local queue would not be stable under the proposed split.
    LocalUnstable,
    /// Foreign queue would not be stable under the proposed split.
    ForeignUnstable,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::NegativeEntry => "NEGATIVE_ENTRY",
            ViolationCode::RowSumExceedsOne => "ROW_SUM_EXCEEDS_ONE",
            ViolationCode::NotStrictlySubstochastic => "NOT_STRICTLY_SUBSTOCHASTIC",
            ViolationCode::NotIrreducible => "NOT_IRREDUCIBLE",
            ViolationCode::ZeroDemand => "ZERO_DEMAND",
            ViolationCode::NonpositiveCapacity => "NONPOSITIVE_CAPACITY",
            ViolationCode::LocalUnstable => "LOCAL_UNSTABLE",
            ViolationCode::ForeignUnstable => "FOREIGN_UNSTABLE",
        }
    }
}

/// One violated invariant with the peer (or row) it concerns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Peer or row index the violation concerns, when one applies.
    pub peer: Option<usize>,
    pub message: String,
}

/// Outcome of a validation pass. `ok` holds exactly when `violations` is
/// empty; `notes` carries informational remarks that do not fail validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn new(violations: Vec<Violation>, notes: Vec<String>) -> Self {
        Self { ok: violations.is_empty(), violations, notes }
    }

    /// True when a violation with the given code is present.
    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

/// Checks every structural invariant of a [`NetworkSpec`] and reports all
/// violations at once. A shape mismatch is a hard error, not a violation.
pub fn validate_spec(spec: &NetworkSpec) -> Result<ValidationReport> {
    spec.check_dimensions()?;
    let n = spec.n;
    let mut violations = Vec::new();
    let mut notes = Vec::new();

    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            let r = spec.routing.get(i, j);
            if !(r >= 0.0) {
                violations.push(Violation {
                    code: ViolationCode::NegativeEntry,
                    peer: Some(i),
                    message: format!("routing[{i}][{j}] = {r} is negative or not a number"),
                });
            }
            row_sum += r;
        }
        if row_sum > 1.0 + ROW_SUM_TOL {
            violations.push(Violation {
                code: ViolationCode::RowSumExceedsOne,
                peer: Some(i),
                message: format!("row {i} sums to {row_sum}, beyond 1 + {ROW_SUM_TOL:e}"),
            });
        }
        if spec.routing.get(i, i) > 0.0 {
            notes.push(format!(
                "routing[{i}][{i}] = {} is a self-forwarding probability; accepted",
                spec.routing.get(i, i)
            ));
        }
    }

    let strictly_substochastic =
        (0..n).any(|i| spec.routing.row(i).iter().sum::<f64>() < 1.0 - ROW_SUM_TOL);
    if !strictly_substochastic {
        violations.push(Violation {
            code: ViolationCode::NotStrictlySubstochastic,
            peer: None,
            message: "every row sums to one: no peer ever resolves a query".into(),
        });
    }

    if !check_irreducible(&spec.routing) {
        violations.push(Violation {
            code: ViolationCode::NotIrreducible,
            peer: None,
            message: "the forwarding graph is not strongly connected".into(),
        });
    }

    for (i, &l) in spec.lambda0.iter().enumerate() {
        if l < 0.0 || !l.is_finite() {
            violations.push(Violation {
                code: ViolationCode::NegativeEntry,
                peer: Some(i),
                message: format!("lambda0[{i}] = {l} must be finite and non-negative"),
            });
        }
    }
    if !spec.lambda0.iter().any(|&l| l > 0.0) {
        violations.push(Violation {
            code: ViolationCode::ZeroDemand,
            peer: None,
            message: "no peer has strictly positive exogenous demand".into(),
        });
    }

    for (i, &m) in spec.mu.iter().enumerate() {
        if !(m > 0.0) {
            violations.push(Violation {
                code: ViolationCode::NonpositiveCapacity,
                peer: Some(i),
                message: format!("mu[{i}] = {m} must be strictly positive"),
            });
        }
    }

    Ok(ValidationReport::new(violations, notes))
}

/// True when the support digraph of a square non-negative matrix is strongly
/// connected. Works on the support graph, so any nonzero entry counts as an
/// edge regardless of magnitude.
pub fn check_irreducible(routing: &Matrix) -> bool {
    assert!(routing.is_square(), "irreducibility needs a square matrix");
    let n = routing.n_rows();
    if n == 0 {
        return false;
    }
    let forward = reach_count(routing, false);
    let backward = reach_count(routing, true);
    forward == n && backward == n
}

/// Number of nodes reachable from node 0 (following edges forward or
/// reversed).
fn reach_count(m: &Matrix, reversed: bool) -> usize {
    let n = m.n_rows();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            let edge = if reversed { m.get(v, u) } else { m.get(u, v) };
            if edge != 0.0 && !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count
}
