//! Golden-rule capacity allocation for peer-to-peer query networks.
//!
//! A group of peers forwards queries among themselves; each peer splits its
//! service capacity between a queue for its own queries and a queue for
//! everyone else's. This crate computes the split under which the delay a
//! peer's traffic experiences in the rest of the network is proportional to
//! the delay that peer imposes on foreign traffic, with one proportionality
//! constant shared by all peers:
//!
//! 1. [`flowbalance`] solves the traffic equations for the expected-visit
//!    matrix `B = (I - R)^{-1}` and the total loads.
//! 2. [`spectral`] finds the dominant eigenpair of the zero-diagonal visit
//!    matrix; the eigenvector pins the reciprocity constant.
//! 3. [`allocation`] turns the eigenvector into per-peer altruism weights and
//!    the closed-form Nash split of each capacity.
//! 4. [`distributed`] reproduces the same quantities with simulated peers
//!    that exchange only messages, round by round.
//! 5. [`jackson`] checks the analytic answers against a discrete-event
//!    simulation of the underlying network of queues.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```text
//! cargo run --example validate        # spec validation and failure codes
//! cargo run --example flow_balance    # B, loads, and the series cross-check
//! cargo run --example eigenpair       # dominant eigenpair of B-tilde
//! cargo run --example golden_rule     # the full allocation pipeline
//! cargo run --example feasibility     # capacity augmentation / demand thinning
//! cargo run --example nash_check      # first-order optimality at the split
//! cargo run --example distributed     # round-based harness vs direct solve
//! cargo run --example simulate        # discrete-event validation
//! ```
//!
//! The `goldenrule` binary wraps the same functionality as subcommands
//! (`validate`, `solve`, `allocate`, `simulate`, `distributed`) over a JSON
//! spec file; see the crate README.

#![forbid(unsafe_code)]
// indexed loops mirror the matrix notation throughout
#![allow(clippy::needless_range_loop)]
// negated comparisons like !(x > 0.0) intentionally treat NaN as a failure
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod cli;
pub mod distributed;
pub mod error;
pub mod flowbalance;
pub mod jackson;
pub mod linalg;
pub mod model;
pub mod report;
pub mod spectral;

pub use allocation::{
    golden_rule_pipeline, GoldenRuleAllocation, PipelineOptions, PipelineOutput, QueueStats,
};
pub use error::{Error, Result};
pub use flowbalance::{solve_flow_balance, FlowSolution};
pub use jackson::{simulate, SimConfig, SimReport};
pub use linalg::Matrix;
pub use model::{validate_spec, NetworkSpec, ValidationReport};
pub use spectral::{perron_eigenpair, EigenPair, PowerOptions};
