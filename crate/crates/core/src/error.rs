use std::path::PathBuf;

/// Errors raised by the simulation and verification routines.
#[derive(Debug, thiserror::Error)]
pub enum FppError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// No tilt parameter exists on the decreasing branch of the log-Laplace
    /// transform. `min_value` is the smallest value of `psi(t) + ln(lambda)`
    /// found over the positive part of the domain.
    #[error("no admissible alpha: {reason} (min of psi(t) + ln(lambda) = {min_value})")]
    NoSolution { reason: String, min_value: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid dependency family: {0}")]
    InvalidFamily(String),

    #[error("search budget of {budget} nodes exceeded")]
    BudgetExceeded { budget: u64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("size limit: {0}")]
    Size(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = FppError> = std::result::Result<T, E>;

impl FppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FppError::Io {
            path: path.into(),
            source,
        }
    }
}
