//! Error taxonomy shared across the workspace.

use std::path::PathBuf;

/// Errors produced by tensor ops, training, and the file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Incompatible tensor/layer shapes.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A value outside an operation's documented domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A run configuration that cannot be executed.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file that does not follow its declared format (bad magic, bad syntax).
    #[error("format error: {0}")]
    Format(String),

    /// A checkpoint whose header and payload disagree.
    #[error("corrupt checkpoint: {0}")]
    Corruption(String),

    /// A checkpoint written by an unsupported format version.
    #[error("unsupported checkpoint version: {0}")]
    Version(String),

    /// Cross-file disagreement, e.g. image/label counts.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Non-finite values where the pipeline requires finite ones.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Stable one-word category, used by the CLI for machine-parsable
    /// failure lines and exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension(_) | Error::Argument(_) | Error::Config(_) => "config",
            Error::Io { .. }
            | Error::Format(_)
            | Error::Corruption(_)
            | Error::Version(_)
            | Error::Consistency(_) => "io",
            Error::Numerical(_) => "numerical",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
