use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments supplied by the caller.
    Usage,
    /// Malformed, missing or inconsistent input data.
    Data,
    /// A numerical procedure could not produce a value.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at data row {row}, column '{column}': cannot read '{value}' as a number")]
    Parse { row: usize, column: String, value: String },

    #[error("missing value at data row {row}, column '{column}'")]
    MissingValue { row: usize, column: String },

    #[error("validation error: cluster '{cluster}' has varying values in cluster-level column '{column}'")]
    ClusterLevelVaries { cluster: String, column: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("no observations")]
    NoObservations,

    #[error("cluster index {index} out of range for {len} clusters")]
    ClusterIndex { index: usize, len: usize },

    #[error("empty window: no observation has positive kernel weight at x = {x:?}")]
    EmptyWindow { x: Vec<f64> },

    #[error("joint density undefined: no cluster has two or more members")]
    NoPairs,

    #[error("singular system: {0}")]
    Singular(String),

    #[error("prediction failed for observation {observation} at h = {h}: {source}")]
    Prediction {
        observation: usize,
        h: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("every candidate bandwidth failed ({} candidates); first failure: {}", .failures.len(), .failures.first().map(|(h, e)| format!("h = {h}: {e}")).unwrap_or_default())]
    AllCandidatesFailed { failures: Vec<(f64, String)> },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::ClusterIndex { .. } => {
                ErrorKind::Usage
            }
            Error::Schema(_)
            | Error::Parse { .. }
            | Error::MissingValue { .. }
            | Error::ClusterLevelVaries { .. }
            | Error::Validation(_)
            | Error::NoObservations
            | Error::Io(_) => ErrorKind::Data,
            Error::EmptyWindow { .. }
            | Error::NoPairs
            | Error::Singular(_)
            | Error::AllCandidatesFailed { .. } => ErrorKind::Numerical,
            Error::Prediction { source, .. } | Error::Context { source, .. } => source.kind(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_bandwidth(name: &str, h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {h}")))
    }
}
