//! Power iteration for the maximal eigenvalue and strictly positive unit
//! right-eigenvector of the zero-diagonal visit matrix. This is the
//! centralized reference the round-based harness is checked against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{l2_norm, Matrix};

/// Iterations without residual improvement before two consecutive iterates
/// are averaged. Periodic support graphs (bipartite two-cycles being the
/// common case) make plain power iteration orbit between two directions whose
/// mean lies on the dominant eigendirection; averaging collapses the orbit.
const STALL_WINDOW: usize = 100;

/// Tuning for [`perron_eigenpair`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerOptions {
    /// Target residual for `||Bv - kappa v||_2`.
    pub tol: f64,
    /// Iteration budget before giving up.
    pub max_iters: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 100_000 }
    }
}

/// Dominant eigenpair of a non-negative irreducible matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    /// Maximal eigenvalue (the spectral radius).
    pub kappa: f64,
    /// Strictly positive right-eigenvector, unit Euclidean norm.
    pub v: Vec<f64>,
    /// Iterations spent.
    pub iterations: usize,
    /// Final `||Bv - kappa v||_2`.
    pub residual: f64,
}

/// Normalizes to unit Euclidean norm, flipping the sign if necessary so the
/// entry of largest magnitude comes out positive.
pub fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = l2_norm(v);
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    if !norm.is_finite() {
        return Err(Error::NonFiniteState("cannot normalize a non-finite vector".into()));
    }
    let mut dominant = 0.0_f64;
    for &x in v {
        if x.abs() > dominant.abs() {
            dominant = x;
        }
    }
    let sign = if dominant < 0.0 { -1.0 } else { 1.0 };
    Ok(v.iter().map(|x| sign * x / norm).collect())
}

/// Computes the Perron eigenpair of `b_tilde` by power iteration from the
/// all-ones vector (deterministic by construction), with a Rayleigh-quotient
/// eigenvalue estimate each step.
pub fn perron_eigenpair(b_tilde: &Matrix, options: &PowerOptions) -> Result<EigenPair> {
    assert!(b_tilde.is_square(), "eigenpair needs a square matrix");
    let n = b_tilde.n_rows();
    if n == 0 || b_tilde.max_abs() == 0.0 {
        return Err(Error::Degenerate(
            "zero matrix has no positive eigenpair; a one-peer network has no reciprocity to balance"
                .into(),
        ));
    }

    let mut v = normalize(&vec![1.0; n])?;
    let mut prev = v.clone();
    let mut best_residual = f64::INFINITY;
    let mut stalled = 0usize;
    let mut residual = f64::INFINITY;

    for iter in 1..=options.max_iters {
        let w = b_tilde.mat_vec(&v);
        let kappa = crate::linalg::dot(&v, &w);
        let mut r = 0.0;
        for i in 0..n {
            let d = w[i] - kappa * v[i];
            r += d * d;
        }
        residual = r.sqrt();
        if !residual.is_finite() {
            return Err(Error::NonFiniteState("power iteration produced a non-finite residual".into()));
        }
        if residual <= options.tol {
            return Ok(EigenPair { kappa, v, iterations: iter, residual });
        }

        if residual < best_residual {
            best_residual = residual;
            stalled = 0;
        } else {
            stalled += 1;
        }

        let next = if stalled >= STALL_WINDOW {
            stalled = 0;
            best_residual = f64::INFINITY;
            let averaged: Vec<f64> = v.iter().zip(&prev).map(|(a, b)| a + b).collect();
            normalize(&averaged)?
        } else {
            match normalize(&w) {
                Ok(next) => next,
                // w = 0 can only happen for reducible inputs that bypassed
                // validation
                Err(Error::ZeroVector) => {
                    return Err(Error::Degenerate(
                        "iteration collapsed to the zero vector; matrix is reducible".into(),
                    ))
                }
                Err(e) => return Err(e),
            }
        };
        prev = v;
        v = next;
    }

    Err(Error::NoConvergence {
        iterations: options.max_iters,
        residual,
        last_b: None,
        last_v: Some(v),
    })
}
