//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by envelope computations, generators and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdpError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver hit its iteration cap.
    #[error("no convergence after {iterations} iterations: {what}")]
    NonConvergence { what: String, iterations: usize },

    /// A root finder was given an interval without a sign change.
    #[error("root not bracketed: {0}")]
    NonBracketing(String),

    /// Two inputs that must have equal length do not.
    #[error("shape mismatch: expected length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    /// Rejection-set sizes along a path are not nondecreasing.
    #[error("rejection sizes must be nondecreasing (violated at index {0})")]
    NonMonotone(usize),

    /// An oracle operation needs truth labels that are absent.
    #[error("truth labels are required for this operation but are absent")]
    MissingLabels,

    /// A malformed data row; `line` is 1-based and counts the header.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Invalid experiment configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A consistency curve needs more grid points than were supplied.
    #[error("insufficient grid: need at least {need} values of m, got {got}")]
    InsufficientGrid { need: usize, got: usize },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(String),
}

impl FdpError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        FdpError::Domain(msg.into())
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            FdpError::Domain(_) => "domain",
            FdpError::NonConvergence { .. } => "non_convergence",
            FdpError::NonBracketing(_) => "non_bracketing",
            FdpError::ShapeMismatch { .. } => "shape_mismatch",
            FdpError::NonMonotone(_) => "non_monotone",
            FdpError::MissingLabels => "missing_labels",
            FdpError::Parse { .. } => "parse",
            FdpError::Config(_) => "config",
            FdpError::InsufficientGrid { .. } => "insufficient_grid",
            FdpError::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for FdpError {
    fn from(e: std::io::Error) -> Self {
        FdpError::Io(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, FdpError>;
