//! Error taxonomy shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration value or unusable setup (missing table, unknown kind, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller violated an operation's contract (shape mismatch, empty input, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An input lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural invariant does not hold on the data.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Numerical failure (singular system, divergence, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Input file could not be parsed; carries the offending location.
    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// A required dataset partition came out empty.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
