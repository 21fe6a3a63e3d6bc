use thiserror::Error;

pub type Result<T> = std::result::Result<T, HawkesError>;

#[derive(Debug, Error)]
pub enum HawkesError {
    /// Bad user input: malformed specs, files, grids or parameters.
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    /// Stationarity condition violated (spectral radius of the integrated kernel >= 1).
    #[error("kernel is not stationary: spectral radius {0:.6} >= 1")]
    NotStationary(f64),

    #[error("singular matrix: {0}")]
    Singular(String),

    /// A numerical routine could not meet its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("simulation aborted after {0} events (max_events cap)")]
    TooManyEvents(usize),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("wrong dimension: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("stage `{stage}` failed on input {fingerprint}: {source}")]
    Stage {
        stage: &'static str,
        fingerprint: String,
        #[source]
        source: Box<HawkesError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HawkesError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        HawkesError::Validation(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        HawkesError::Numerical(msg.into())
    }

    /// Process exit code: 2 for validation errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HawkesError::Stage { source, .. } => source.exit_code(),
            HawkesError::Singular(_)
            | HawkesError::Numerical(_)
            | HawkesError::TooManyEvents(_) => 3,
            _ => 2,
        }
    }
}
