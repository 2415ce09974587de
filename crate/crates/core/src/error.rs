use alloc::string::String;

/// Failures raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("coefficient regularity violated: {0}")]
    CoefficientRegularity(String),
    #[error("observation set is empty")]
    EmptySet,
    #[error("numerical failure: {message} (residual {residual:e})")]
    NumericalFailure { message: String, residual: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("search failed: {0}")]
    SearchFailure(String),
    #[error("synthesis failed at step {step:?}: mode {mode} unreachable ({reason})")]
    SynthesisFailure {
        step: Option<usize>,
        mode: usize,
        reason: String,
    },
    #[error("degenerate chart at boundary node {node} (|det| = {det:e})")]
    DegenerateChart { node: usize, det: f64 },
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidArgument(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
