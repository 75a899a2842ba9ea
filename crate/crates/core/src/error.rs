use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An environment or perturbation description violates its support rules.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A function was evaluated outside the set where it is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation was called with arguments that break its contract.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A numerical routine did not reach its target accuracy.
    #[error("{what} did not converge: estimate {estimate:e}, error estimate {error_estimate:e} after {evaluations} evaluations")]
    Numerical {
        what: String,
        estimate: f64,
        error_estimate: f64,
        evaluations: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
