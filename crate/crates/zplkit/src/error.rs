//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the analysis and synthesis operations.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed to reach its accuracy contract.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A truncated series could not reach the requested tolerance.
    #[error("truncation error: {0}")]
    Truncation(String),

    /// A sample grid is too coarse to resolve the requested lineshape.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// Peak search found nothing above the prominence threshold.
    #[error("no peak above the prominence threshold")]
    PeakNotFound,

    /// The fit design matrix is rank deficient (e.g. angles aliased mod 90°).
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    /// A calibration data set is missing required reference measurements.
    #[error("incomplete calibration: {0}")]
    IncompleteCalibration(String),

    /// The calibration fixed-point iteration failed to converge.
    #[error("calibration error: no fixed point after {iterations} iterations")]
    CalibrationConvergence { iterations: usize },

    /// Instrument visibility too small to divide out reliably.
    #[error("unreliable correction: instrument visibility {visibility} at or below 0.05")]
    UnreliableCorrection { visibility: f64 },

    /// A nonlinear fit diverged or exhausted its iteration budget.
    #[error("fit error: {0}")]
    Fit(String),

    /// Malformed input file. `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// Stable machine-readable tag for this error kind, used by the CLI's
    /// JSON error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Numerical(_) => "numerical",
            Error::Truncation(_) => "truncation",
            Error::Sampling(_) => "sampling",
            Error::PeakNotFound => "peak_not_found",
            Error::DegenerateDesign(_) => "degenerate_design",
            Error::IncompleteCalibration(_) => "incomplete_calibration",
            Error::CalibrationConvergence { .. } => "calibration_convergence",
            Error::UnreliableCorrection { .. } => "unreliable_correction",
            Error::Fit(_) => "fit",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
