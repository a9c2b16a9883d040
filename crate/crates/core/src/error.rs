use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Inconsistent or out-of-range configuration (grid mode, sizes, parameters).
    #[error("configuration error: {0}")]
    Config(String),
    /// Input data violates a precondition (non-finite values, empty masks, normalization).
    #[error("data error: {0}")]
    Data(String),
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The integrator failed to reach its stopping criterion.
    #[error("divergence error: {0}")]
    Divergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
