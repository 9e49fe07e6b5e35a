use thiserror::Error;

/// Errors raised by the optimization library.
#[derive(Debug, Error)]
pub enum BoError {
    /// The caller violated an input contract (dimension mismatch, empty domain, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// An argument fell outside the domain where a function is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A factorization or solve failed even after jitter escalation.
    #[error("numerical error: {message}")]
    Numerical {
        message: String,
        /// Largest jitter tried before giving up.
        max_jitter: f64,
        /// Ratio of largest to smallest diagonal entry of the failing matrix.
        diag_ratio: f64,
    },

    /// Malformed tabular or configuration input.
    #[error("input error: {0}")]
    Input(String),

    /// A configuration field is missing or invalid.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BoError {
    pub fn usage(msg: impl Into<String>) -> Self {
        BoError::Usage(msg.into())
    }

    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        BoError::Config {
            field: field.into(),
            message: msg.into(),
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, BoError::Numerical { .. })
    }

    /// Process exit code: 3 for numerical failures, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            3
        } else {
            2
        }
    }
}

pub type Result<T> = std::result::Result<T, BoError>;

pub(crate) fn check_dim(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected != got {
        return Err(BoError::Usage(format!(
            "{what}: expected dimension {expected}, got {got}"
        )));
    }
    Ok(())
}
