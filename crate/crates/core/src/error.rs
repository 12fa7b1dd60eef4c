use std::path::PathBuf;

use thiserror::Error;

use crate::sdp::SdpStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("no stabilizing solution: {0}")]
    NoSolution(String),

    #[error("{what} did not converge within {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("closed loop is not stable (spectral radius {0})")]
    Unstable(f64),

    #[error("strong-stability certificate failed: ||L|| = {0} >= 1")]
    CertificateFailure(f64),

    #[error("SDP solve ended with status {status:?}: {detail}")]
    Sdp { status: SdpStatus, detail: String },

    #[error("policy extraction failed: {0}")]
    Extraction(String),

    #[error("non-finite value at step {step}: {what}")]
    NonFinite { step: usize, what: &'static str },

    #[error("instance generation failed after {0} attempts")]
    GenerationFailed(usize),

    #[error("run aborted at step {step}: {reason}")]
    Aborted { step: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
