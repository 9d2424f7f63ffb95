use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by an external worker process.
#[derive(Error, Debug)]
pub enum BackendError {
    #[error("failed to spawn worker {command:?}: {source}")]
    Spawn {
        command: Vec<String>,
        #[source]
        source: io::Error,
    },
    #[error("worker protocol violation: {0}")]
    Protocol(String),
    #[error("worker did not answer within {0:.1} s")]
    Timeout(f64),
    #[error("worker exited mid-request ({status})")]
    Exited { status: String },
    #[error("worker reported an error: {0}")]
    Remote(String),
    #[error("worker does not support op {0:?}")]
    UnsupportedOp(String),
    #[error("worker i/o failure: {0}")]
    Io(#[from] io::Error),
}

#[derive(Error, Debug)]
pub enum Error {
    #[error("malformed WAV file: {0}")]
    Format(String),
    #[error("unsupported channel count {0}, only mono is accepted")]
    UnsupportedChannels(u16),
    #[error("unsupported sample encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("failed to write {path}: {message}")]
    Write { path: String, message: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
    #[error("reference energy {0:e} is below the degenerate floor")]
    DegenerateReference(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("interpolation segment is degenerate (mixture equals previous estimate)")]
    DegenerateSegment,
    #[error("cannot merge reports: {0}")]
    Merge(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("step {step}, candidate {candidate}: {source}")]
    Step {
        step: usize,
        candidate: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Strips step context wrappers down to the originating error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            other => other,
        }
    }
}
