//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Errors produced by signal I/O, transforms and the solver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// I/O failure, with the path that was being accessed.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Structurally malformed WAV input; `chunk` names the offending chunk.
    #[error("malformed WAV ({chunk} chunk): {detail}")]
    WavParse { chunk: &'static str, detail: String },

    /// WAV format code / bit depth combination we do not decode.
    #[error("unsupported WAV format: code {format_code}, {bits} bits per sample")]
    UnsupportedFormat { format_code: u16, bits: u16 },

    /// Shape mismatch between signals, dictionaries or coefficient grids.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Invalid values (NaN samples, non-unit directions, bad config).
    #[error("validation failed: {0}")]
    Validation(String),

    /// The iterative solver produced a non-finite loss.
    #[error("solver diverged at iteration {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },
}

impl Error {
    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
