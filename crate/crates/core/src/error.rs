use thiserror::Error;

/// Errors surfaced by the library and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layered state space: {0}")]
    InvalidSpace(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid policy at layer {layer}, state {state}: row sums to {sum}")]
    InvalidPolicy { layer: usize, state: usize, sum: f64 },

    #[error("invalid transition kernel: {0}")]
    InvalidKernel(String),

    #[error("infeasible game spec: {0}")]
    InfeasibleSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("dual objective diverged (non-finite value)")]
    DivergedDuals,

    #[error("projection did not converge after {iterations} iterations (residual {residual:e})")]
    NonConverged { iterations: usize, residual: f64 },

    #[error("episode {episode}: {source}")]
    Episode {
        episode: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("epoch count {epochs} exceeds the cap {cap:.1}")]
    EpochCap { epochs: usize, cap: f64 },

    #[error("infeasible budget {budget}: minimum achievable utility is {min_utility}")]
    InfeasibleBudget { budget: f64, min_utility: f64 },

    #[error("hindsight solver did not reach tolerance: exploitability {exploitability:e}")]
    ComparatorNonConverged { exploitability: f64 },

    #[error("decomposition unavailable: {0}")]
    Unavailable(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
