//! Error type shared by every module in the crate.

use thiserror::Error;

/// Errors raised by scheme construction, design, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A scheme cannot be decoded, e.g. a zero message vector.
    #[error("degenerate scheme: {0}")]
    DegenerateScheme(String),

    /// The plain-to-tilde fixed-point iteration hit its cap.
    #[error("no convergence after {iterations} iterations (last deltas {delta_a:e}, {delta_b:e})")]
    ConvergenceFailure {
        iterations: usize,
        delta_a: f64,
        delta_b: f64,
    },

    /// An optimizer result failed its own post-condition check.
    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    /// The requested targets cannot be met within the power budget.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Alternate composition was asked for designs without the required support.
    #[error("composition unsupported: {0}")]
    CompositionUnsupported(String),

    /// Exhaustive search refused a problem that is too large.
    #[error("exhaustive search limited to n <= {max}, got {n}")]
    CostGuard { n: usize, max: usize },

    /// A design file or CSV row could not be parsed.
    #[error("malformed data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}
