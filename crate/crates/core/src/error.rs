use thiserror::Error;

/// Errors produced by the deconvolution toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpdcError {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("unsupported operation: {0}")]
    UnsupportedOperation(String),

    #[error("unsupported kernel/filter combination: {0}")]
    UnsupportedCombination(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive definite (failed at pivot {pivot} after jitter {jitter:e})")]
    NotPositiveDefinite { pivot: usize, jitter: f64 },

    #[error("posterior variance {value:e} at index {index} is below the numerical tolerance")]
    NegativeVariance { index: usize, value: f64 },

    #[error("numerical instability: {0}")]
    Instability(String),

    #[error("training failed: {0}")]
    Training(String),
}

pub type Result<T> = std::result::Result<T, GpdcError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(GpdcError::Domain(msg.into()))
}

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(GpdcError::ParameterDomain(msg.into()))
}
