use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Numeric,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid dimension in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("degenerate input in {op}: {detail}")]
    Degenerate { op: &'static str, detail: String },

    #[error("{op} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        op: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("not enough aligned samples: need at least {needed}, have {available}")]
    Capacity { needed: usize, available: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("synthetic generation failed: {0}")]
    Generation(String),

    #[error("forward trace mismatch: {0}")]
    Trace(String),

    #[error("{}{}: {msg}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Format {
        path: PathBuf,
        line: Option<usize>,
        msg: String,
    },

    #[error("incompatible model and dataset: {0}")]
    Compatibility(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Format { .. }
            | Error::Io { .. }
            | Error::Compatibility(_)
            | Error::Precondition(_)
            | Error::Capacity { .. } => ErrorKind::Data,
            Error::Shape { .. }
            | Error::Dimension { .. }
            | Error::Degenerate { .. }
            | Error::Convergence { .. }
            | Error::Generation(_) => ErrorKind::Numeric,
            Error::Trace(_) | Error::Internal(_) => ErrorKind::Internal,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
