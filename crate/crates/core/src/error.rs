use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("node index {index} out of range (n_steps = {n_steps})")]
    Index { index: usize, n_steps: usize },

    #[error("non-finite state encountered at node {node}")]
    NumericalBlowup { node: usize },

    #[error("fixed-point iteration diverged: {0}")]
    FixedPointDiverged(String),

    #[error("iteration budget exhausted: {0}")]
    ConvergenceFailure(String),

    #[error("problem size {size} exceeds the limit of {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("bad magic number: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated file: {0}")]
    TruncatedFile(String),

    #[error("count mismatch: {0}")]
    CountMismatch(String),

    #[error("unsupported format version {found} (supported: {supported})")]
    VersionUnsupported { found: u32, supported: u32 },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than by inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalBlowup { .. }
                | Error::FixedPointDiverged(_)
                | Error::ConvergenceFailure(_)
        )
    }
}
