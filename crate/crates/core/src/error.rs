use thiserror::Error;

/// Errors raised by the solver library.
///
/// The variants fall into three families that the command-line driver maps
/// onto exit codes: configuration/format problems, data validation failures
/// and solver non-convergence.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid shape must be odd along every axis, axis {axis} has N = {n}")]
    EvenGrid { axis: usize, n: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("non-finite value at grid index {index:?}")]
    NonFinite { index: Vec<i64> },

    #[error("coefficient at grid index {index:?} is not symmetric positive definite: {reason}")]
    NotSpd { index: Vec<i64>, reason: String },

    #[error("grid specifications of the operands differ")]
    SpecMismatch,

    #[error("format error: {0}")]
    Format(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    /// Some load cases of a homogenization run failed to converge; the
    /// reports of every case are kept for inspection.
    #[error("solver did not converge: {message}")]
    PartialSolve { message: String, reports: Vec<crate::solver::SolveReport> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by invalid input data (as opposed to
    /// malformed configuration or I/O problems).
    pub fn is_data_error(&self) -> bool {
        matches!(self, Error::Data(_) | Error::NonFinite { .. } | Error::NotSpd { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
