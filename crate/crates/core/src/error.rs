use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller asked for something the selected configuration cannot do.
    #[error("usage error: {0}")]
    Usage(String),

    /// A state or operator failed a consistency check (norm, symmetry tag).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// Probability reached the edge of the truncated momentum window.
    #[error(
        "truncation error at step {step}: edge probability {leakage:.3e} exceeds {limit:.1e}; \
         use a larger basis (currently R = {basis})"
    )]
    Truncation {
        step: u64,
        leakage: f64,
        limit: f64,
        basis: usize,
    },

    /// Two operands live on different momentum windows.
    #[error("window mismatch: {0}")]
    WindowMismatch(String),

    /// Least-squares fits and similar estimators without enough data.
    #[error("fit error: {0}")]
    Fit(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("resource error: {0}")]
    Resource(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
