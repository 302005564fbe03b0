use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("non-numeric cell at line {line}, column `{column}`: {value:?}")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },

    #[error("class label at line {line} is not a non-negative integer: {value}")]
    InvalidLabel { line: u64, value: f64 },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),

    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("alpha={alpha} is too small for n_cal={n_cal}: (n_cal+1)*alpha < 1")]
    AlphaTooSmall { n_cal: usize, alpha: f64 },

    #[error("calibration set is empty")]
    EmptyCalibration,

    #[error("non-finite score at position {0}")]
    NonFiniteScore(usize),

    #[error("class index {index} out of range for {n_classes} classes")]
    ClassOutOfRange { index: usize, n_classes: usize },

    #[error("classes absent from calibration set: {0:?}")]
    AbsentClasses(Vec<usize>),

    #[error("expected a {expected} dataset")]
    WrongTask { expected: &'static str },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("T={0} too small for KS (need at least 20 trials)")]
    TooFewTrials(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}
