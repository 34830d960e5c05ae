use thiserror::Error;

use crate::margins::MarginCertificate;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("measure has zero total mass")]
    ZeroMass,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("dataset contains a single class")]
    SingleClass,

    #[error("non-finite iterate at step {step}")]
    NonFinite { step: usize },

    #[error("all features are zero (||z||_inf = 0)")]
    ZeroFeatures,

    #[error("solver did not reach gap tolerance {tol:e} (gap {gap:e})")]
    NotConverged {
        gap: f64,
        tol: f64,
        best: Box<MarginCertificate<f64>>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
