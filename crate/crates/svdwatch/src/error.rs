use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (shape, finiteness, range).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A linear system was singular or numerically rank-deficient.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// The grid description is unusable (disconnected, self-loops, ...).
    #[error("topology error: {0}")]
    Topology(String),

    /// No parameter value satisfies the requested condition.
    #[error("no solution: {0}")]
    NoSolution(String),

    /// An iterative numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A data file did not match the expected layout.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
