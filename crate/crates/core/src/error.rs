use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Shape or basis mismatch between matrix-valued inputs.
    #[error("structural error: {0}")]
    Structure(String),

    /// A named parameter violates one of its documented bounds.
    #[error("parameter `{name}`: {message}")]
    Parameter { name: &'static str, message: String },

    /// A numerical routine failed or produced an unusable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Invalid gauge choice for the frozen-mediator branch.
    #[error("gauge error: {0}")]
    Gauge(String),

    /// The requested closed form does not apply to these parameters.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// Configuration parsing or validation failure.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parameter(name: &'static str, message: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            message: message.into(),
        }
    }

    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
