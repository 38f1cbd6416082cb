use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("empty box set where a nonempty one is required")]
    EmptySet,

    #[error("invalid box: lo must be strictly below hi on every axis (got lo={lo:?}, hi={hi:?})")]
    InvalidBox { lo: Vec<f64>, hi: Vec<f64> },

    #[error("unsupported dimension {0}: only 1 and 2 are handled")]
    UnsupportedDimension(usize),

    #[error("mixed open/closed operands are not allowed for {0}")]
    MixedClosedness(&'static str),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no closed-form antiderivative available for this family/function pair")]
    MissingAntiderivative,

    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),

    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
