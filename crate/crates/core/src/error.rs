use thiserror::Error;

/// Errors raised anywhere in the evaluation stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdlError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is numerically singular (condition number {condition:.3e})")]
    Singular { condition: f64 },

    #[error("series did not converge within {n_max} terms per dimension (partial value {partial:.6e}, last relative shell {last_shell:.3e})")]
    NonConvergence { partial: f64, n_max: usize, last_shell: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("no bracket: {0}")]
    NoBracket(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("simulation aborted: {0}")]
    Pathological(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl FdlError {
    /// Process exit code associated with the error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            FdlError::NonConvergence { .. } | FdlError::Degenerate(_) | FdlError::Pathological(_) => 3,
            FdlError::NoBracket(_) => 4,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for FdlError {
    fn from(e: std::io::Error) -> Self {
        FdlError::Io(e.to_string())
    }
}

impl From<csv::Error> for FdlError {
    fn from(e: csv::Error) -> Self {
        FdlError::Io(e.to_string())
    }
}

pub type Result<T, E = FdlError> = std::result::Result<T, E>;
