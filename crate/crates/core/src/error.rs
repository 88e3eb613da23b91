use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, specs or config values that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    /// A forward op produced NaN or ±inf.
    #[error("numeric error in {op}: non-finite value at flat index {index}")]
    Numeric { op: String, index: usize },

    /// The target needs more frames than the input provides.
    #[error("infeasible CTC target: {labels} labels need at least {required} frames, got {frames}")]
    Infeasible {
        labels: usize,
        required: usize,
        frames: usize,
    },

    #[error("shape mismatch for `{name}`: expected {expected:?}, found {found:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported checkpoint version {found} (this build reads {expected})")]
    Version { found: u32, expected: u32 },

    #[error("truncated checkpoint while reading {0}")]
    Truncated(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 2 config, 3 numeric, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::Shape { .. } | Error::Infeasible { .. } => 2,
            Error::Numeric { .. } => 3,
            Error::Format(_)
            | Error::Version { .. }
            | Error::Truncated(_)
            | Error::Parse { .. }
            | Error::File { .. }
            | Error::Io(_) => 4,
        }
    }
}
