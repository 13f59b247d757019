//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by kernel algebra, estimators, the harness, and persistence.
#[derive(Debug, Error)]
pub enum Error {
    /// Two points (or a point and a dataset) disagree on dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Two matrices disagree on shape where equal shapes are required.
    #[error("shape mismatch: {lhs_rows}x{lhs_cols} vs {rhs_rows}x{rhs_cols}")]
    ShapeMismatch {
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },

    /// An operation received an empty collection it cannot work on.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A NaN or infinity reached an operation that requires finite reals.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// An invalid parameter (non-positive lengthscale, wrong kernel family, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A symmetric solve failed even after exhausting jitter escalation.
    /// `jitter_reached` is the largest additional ridge that was attempted.
    #[error("matrix numerically singular (jitter escalation exhausted at {jitter_reached:e})")]
    Singular { jitter_reached: f64 },

    /// A configuration file or field failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// A trial aborted mid-run; carries the trial index and the underlying cause.
    #[error("trial {trial} aborted at round {round}: {source}")]
    TrialAborted {
        trial: u32,
        round: u32,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
