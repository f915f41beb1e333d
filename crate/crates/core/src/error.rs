/// Crate-wide error type.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or out-of-range configuration (grids, CFL, brackets, ...).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A numerical routine failed to reach its tolerance. Carries the best
    /// estimate it produced and the error bound it achieved.
    #[error("numeric error: {context} (best estimate {estimate:e}, achieved tolerance {achieved:e})")]
    Numeric {
        context: String,
        estimate: f64,
        achieved: f64,
    },

    /// Internal bookkeeping invariant violated; indicates a bug, not bad input.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
