use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate band {band}: no positive weight between {lo:.3} Hz and {hi:.3} Hz")]
    DegenerateBand { band: usize, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch at layer {layer} ({kind}): {detail}")]
    Shape { layer: usize, kind: String, detail: String },

    #[error("missing classes: {}", .0.join(", "))]
    MissingClasses(Vec<String>),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("non-finite loss at epoch {epoch}, first non-finite output at layer {layer} ({kind})")]
    NonFinite { epoch: usize, layer: usize, kind: String },

    #[error("degenerate tandem operating point: C1 = {c1}, C2 = {c2}")]
    DegenerateTandem { c1: f64, c2: f64 },

    #[error("malformed {what} file {path}: {detail}")]
    Format {
        what: &'static str,
        path: PathBuf,
        detail: String,
    },

    #[error(
        "config hash mismatch for {path}: artifact {found:016x}, current {expected:016x} (use --force to override)"
    )]
    ConfigMismatch { path: PathBuf, expected: u64, found: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// Process exit code: 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 1,
            Error::NonFinite { .. } => 3,
            _ => 2,
        }
    }
}
