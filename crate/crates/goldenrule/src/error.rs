//! Crate-wide error type. Each variant carries the short upper-case code that
//! also appears in CLI reports.

use crate::linalg::Matrix;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Inputs whose shapes disagree; distinct from a validation failure.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// `I - R` is numerically singular, i.e. a row-sum-one component slipped
    /// past validation.
    #[error("singular flow-balance system: {0}")]
    SingularSystem(String),

    /// An iteration hit its round/iteration budget. For the distributed
    /// harness the last iterates ride along so callers can inspect them.
    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last_b: Option<Matrix>,
        last_v: Option<Vec<f64>>,
    },

    /// Matrix without a usable Perron pair (zero matrix, empty, 1x1).
    #[error("degenerate matrix: {0}")]
    Degenerate(String),

    /// Cannot normalize the zero vector.
    #[error("zero vector cannot be normalized")]
    ZeroVector,

    /// The golden-rule condition `v_i (mu_i - Lambda_i) > 1` fails; lists the
    /// offending peers with their capacity shortfalls `1/v_i + Lambda_i - mu_i`.
    #[error("infeasible golden-rule condition at peers {}",
        format_shortfalls(.shortfalls))]
    Infeasible { shortfalls: Vec<(usize, f64)> },

    /// Total capacity does not exceed total load at some peer.
    #[error("capacity does not exceed total load: {0}")]
    InfeasibleCapacity(String),

    /// No demand scaling can reach feasibility because `mu_i <= 1/v_i`.
    #[error("demand thinning impossible: {0}")]
    ThinningImpossible(String),

    /// A queue-stability denominator is non-positive.
    #[error("unstable queue configuration: {0}")]
    Unstable(String),

    /// Simulation preconditions violated (stability of the given split).
    #[error("unstable simulation config: {0}")]
    UnstableConfig(String),

    /// Structurally invalid options (horizon, warmup fraction, replications).
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// NaN or infinity appeared in harness state or a message payload.
    #[error("non-finite state: {0}")]
    NonFiniteState(String),

    /// Wraps a sub-error with the pipeline stage that raised it.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

fn format_shortfalls(shortfalls: &[(usize, f64)]) -> String {
    shortfalls
        .iter()
        .map(|(peer, gap)| format!("{peer} (shortfall {gap:.6})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    /// Short machine-readable code, stable across message wording changes.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DIMENSION_MISMATCH",
            Error::SingularSystem(_) => "SINGULAR_SYSTEM",
            Error::NoConvergence { .. } => "NO_CONVERGENCE",
            Error::Degenerate(_) => "DEGENERATE",
            Error::ZeroVector => "ZERO_VECTOR",
            Error::Infeasible { .. } => "INFEASIBLE",
            Error::InfeasibleCapacity(_) => "INFEASIBLE_CAPACITY",
            Error::ThinningImpossible(_) => "THINNING_IMPOSSIBLE",
            Error::Unstable(_) => "UNSTABLE",
            Error::UnstableConfig(_) => "UNSTABLE_CONFIG",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
            Error::NonFiniteState(_) => "NON_FINITE_STATE",
            Error::Stage { source, .. } => source.code(),
        }
    }

    /// Attaches a pipeline stage label.
    pub fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
