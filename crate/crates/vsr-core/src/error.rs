//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition (shape mismatch,
    /// indivisible dimensions, invalid configuration, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file parsed but its content is inconsistent (bad manifest,
    /// dimension mismatch, non-finite samples, ...).
    #[error("malformed {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("training diverged at step {step}: loss is not finite")]
    Diverged { step: usize },

    /// The frame source failed mid-stream. Frames before `frames_emitted`
    /// were processed and flushed to the sink.
    #[error("frame source failed after {frames_emitted} frames: {reason}")]
    SourceFailed { frames_emitted: usize, reason: String },
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
