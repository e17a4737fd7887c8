use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// [`Error::exit_code`] maps each variant onto the CLI exit-code contract:
/// capacity problems exit with 3, everything else the user can fix in the
/// input exits with 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: incomplete sample (empty field in column {column}); every case must be fully observed")]
    IncompleteSample { line: u64, column: usize },

    #[error("variable `{name}` has {observed} observed categories; at least 2 are required")]
    DegenerateVariable { name: String, observed: usize },

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("ordering violation: {0}")]
    Ordering(String),

    #[error("model algebra: {0}")]
    Algebra(String),

    #[error("prior: {0}")]
    Prior(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{what} exceeds the cap of {cap} (got {got})")]
    Capacity {
        what: String,
        cap: usize,
        got: usize,
    },

    #[error("validation: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
