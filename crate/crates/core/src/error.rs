use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("injections do not sum to zero (sum = {sum} kWh, tolerance = {tolerance} kWh)")]
    UnbalancedInjections { sum: f64, tolerance: f64 },

    #[error("linear system is singular; the grid is likely disconnected")]
    SingularSystem,

    #[error("line {index} has non-positive capacity")]
    ZeroCapacity { index: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no built-in topology named `{name}`")]
    MissingTopology { name: String },

    #[error("{path}:{line}: {message}")]
    MalformedFile {
        path: String,
        line: usize,
        message: String,
    },

    #[error("peer {peer} has zero demand")]
    ZeroDemand { peer: usize },

    #[error("missing reference solution for {case} seed {seed}")]
    MissingReference { case: String, seed: u64 },

    #[error("no records to report")]
    EmptyInput,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid loads: {0}")]
    InvalidLoads(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
