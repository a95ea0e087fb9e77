use std::io;

use thiserror::Error;

/// Errors produced by the trace-mining pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("trace line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("trace contains no events")]
    EmptyTrace,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sequence too short to split: {0} slices")]
    TooShort(usize),

    #[error("no posterior samples available")]
    NoSamples,

    #[error("artifact: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
