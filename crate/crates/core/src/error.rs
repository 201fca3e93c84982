//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the simulator, the lookup tables and the estimator.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's input domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A closed-form inversion has no solution for the given value.
    #[error("no solution: {0}")]
    NoSolution(String),

    /// A metric is undefined for the given data (e.g. no records).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Least-squares fit is degenerate (e.g. all-zero regressor).
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// A persisted artifact (LuT, factors, config) failed to parse.
    #[error("format error{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Format {
        /// 1-based line number when known.
        line: Option<usize>,
        msg: String,
    },

    /// A required artifact is missing or inconsistent with the request.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn format(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Format {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
