//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input failed its domain precondition (non-finite, wrong sign, empty...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A price violates static no-arbitrage bounds.
    #[error("no-arbitrage violation: {0}")]
    NoArbitrage(String),

    /// An iterative routine failed to converge.
    #[error("numerical error: {what} did not converge after {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },

    /// An index or maturity outside the range covered by the model/data.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// First-order smile produced a negative implied vol.
    #[error("vol-of-vol too large: {0}")]
    VolOfVolTooLarge(String),

    /// A model degenerate for the requested quantity (e.g. zero skew in an SSR).
    #[error("degenerate model: {0}")]
    Degenerate(String),

    /// Not enough observations for an estimator.
    #[error("insufficient data: need {required}, have {actual}")]
    InsufficientData { required: usize, actual: usize },

    /// A data file failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code used by the CLI's JSON error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::NoArbitrage(_) => "no_arbitrage",
            Error::NonConvergence { .. } => "non_convergence",
            Error::OutOfRange(_) => "out_of_range",
            Error::VolOfVolTooLarge(_) => "vol_of_vol_too_large",
            Error::Degenerate(_) => "degenerate_model",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::Parse { .. } => "parse_error",
            Error::Io(_) => "io_error",
        }
    }
}
