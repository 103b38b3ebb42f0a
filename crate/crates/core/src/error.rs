use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Every variant maps to a stable, machine-readable code (see [`Error::code`])
/// which the command-line front end prints on failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("robustness {r} is below e; w e^(1/w) = r has no real root")]
    RobustnessBelowE { r: f64 },

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("threshold {threshold} is outside the represented value range [{min}, {max}]")]
    ThresholdOutOfRange { threshold: f64, min: f64, max: f64 },

    #[error("need at least {required} samples, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("consistency {c} is outside (1, e]")]
    ConsistencyOutOfRange { c: f64 },

    #[error("slope sequence has a non-positive left asymptotic slope; the left mass diverges")]
    DivergentTail,

    #[error("polynomial coefficient {value} at k = {k} exceeds the overflow guard")]
    NumericOverflow { k: usize, value: f64 },

    #[error("fixed-point iteration did not converge after {iterations} sweeps (last change {change})")]
    NonConvergence { iterations: usize, change: f64 },

    #[error("dual certificate violates row {row} by {violation}")]
    FeasibilityViolation { row: String, violation: f64 },

    #[error("invalid bidding function: {0}")]
    InvalidFunction(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("graph is disconnected: vertex {unreachable} unreachable from vertex 0")]
    Disconnected { unreachable: usize },

    #[error("edge ({u}, {v}) has non-positive weight {weight}")]
    NonPositiveWeight { u: usize, v: usize, weight: f64 },

    #[error("no baseline clustering for k = {k}")]
    MissingBaseline { k: usize },

    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable upper-case error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::RobustnessBelowE { .. } => "ROBUSTNESS_BELOW_E",
            Error::NoSignChange { .. } => "NO_SIGN_CHANGE",
            Error::ThresholdOutOfRange { .. } => "THRESHOLD_OUT_OF_RANGE",
            Error::InsufficientSamples { .. } => "INSUFFICIENT_SAMPLES",
            Error::ConsistencyOutOfRange { .. } => "CONSISTENCY_OUT_OF_RANGE",
            Error::DivergentTail => "DIVERGENT_TAIL",
            Error::NumericOverflow { .. } => "NUMERIC_OVERFLOW",
            Error::NonConvergence { .. } => "NON_CONVERGENCE",
            Error::FeasibilityViolation { .. } => "FEASIBILITY_VIOLATION",
            Error::InvalidFunction(_) => "INVALID_FUNCTION",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
            Error::Parse { .. } => "PARSE_ERROR",
            Error::Disconnected { .. } => "DISCONNECTED",
            Error::NonPositiveWeight { .. } => "NONPOSITIVE_WEIGHT",
            Error::MissingBaseline { .. } => "MISSING_BASELINE",
            Error::Io { .. } => "IO_ERROR",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
