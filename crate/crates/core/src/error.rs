use std::path::PathBuf;

/// Error type shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed on-disk data: corpus files, checkpoints, PMI tables.
    #[error("format error: {0}")]
    Format(String),

    /// Caller handed in something that violates an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Tensor shapes do not conform to the primitive's rule.
    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// An API was used out of order (e.g. backward twice on one tape).
    #[error("state error: {0}")]
    State(String),

    /// NaN/Inf or a masked-away distribution; training aborts on these.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// PMI query for a pair with no co-occurrence; callers skip, not -inf.
    #[error("undefined pmi pair ({x}, {y})")]
    UndefinedPair { x: String, y: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for the CLI: 3 for data/format problems, 4 for
    /// numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
