use num_complex::Complex64;
use thiserror::Error;

use crate::neumann::NeumannSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("n must be even and ≥ 8 (got {0})")]
    InvalidGridSize(usize),

    #[error("exponent must satisfy q ≥ {min} (got {q})")]
    InvalidExponent { q: f64, min: f64 },

    #[error("p must lie in [0,1) (got {0})")]
    InvalidPole(f64),

    #[error("k must lie in [0,1) (got {0})")]
    InvalidDilatationBound(f64),

    #[error("dilatation sup norm {sup} exceeds the declared bound k = {k}")]
    DilatationExceedsBound { sup: f64, k: f64 },

    #[error("pad_factor must be ≥ 2 (got {0})")]
    InvalidPadFactor(usize),

    #[error("A_q not configured for q = {0}")]
    OperatorNormNotConfigured(f64),

    #[error("non-contractive dilatation: M = {0} ≥ 1")]
    NonContractive(f64),

    #[error("max terms exceeded: {max_terms} terms computed, last term norm {last_norm:e}")]
    MaxTermsExceeded {
        max_terms: usize,
        last_norm: f64,
        partial: Box<NeumannSolution>,
    },

    #[error("evaluation point {0} coincides with a pole of the map")]
    Pole(Complex64),

    #[error("evaluation at the origin is not defined by the series formula; use the ψ-side limit")]
    Origin,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, looking through job-stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
