use thiserror::Error;

/// Errors raised anywhere in the crate.
///
/// The variants split along the CLI exit-code boundary: `Invalid*` and
/// `Domain` are input problems, the rest are numerical failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} outside the domain [{lo}, {hi}] of a tabulated function")]
    Domain { t: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("degenerate solution pair: |W| = {0:e}")]
    DegeneratePair(f64),

    #[error("solution vanishes at t = {t}")]
    ZeroCrossing { t: f64 },

    #[error("boundary guard tripped in {stage}: edge amplitude {edge:e} vs peak {peak:e}")]
    Boundary { stage: String, edge: f64, peak: f64 },

    #[error("state not normalised: norm = {0}")]
    Unnormalized(f64),

    #[error("grid geometry mismatch")]
    Geometry,

    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

impl Error {
    /// True for errors caused by bad input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_)
                | Error::InvalidArgument(_)
                | Error::Domain { .. }
                | Error::Dimension { .. }
                | Error::Geometry
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
