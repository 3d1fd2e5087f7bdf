use gpdc::GpdcError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, configuration or input files.
    #[error("{0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },

    /// The computation itself failed.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io { context: context.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Io { .. } => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl From<GpdcError> for CliError {
    fn from(e: GpdcError) -> Self {
        match e {
            GpdcError::ParameterDomain(_)
            | GpdcError::UnsupportedDimension(_)
            | GpdcError::UnsupportedOperation(_)
            | GpdcError::UnsupportedCombination(_)
            | GpdcError::Domain(_) => Self::Usage(e.to_string()),
            GpdcError::NotPositiveDefinite { .. }
            | GpdcError::NegativeVariance { .. }
            | GpdcError::Instability(_)
            | GpdcError::Training(_) => Self::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
