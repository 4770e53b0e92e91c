use serde::Serialize;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, MflqError>;

/// One row of a refinement study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub sup_delta_gamma: f64,
    pub sup_delta_gamma_hat: f64,
    pub sup_delta_theta: f64,
    /// Same deltas between successive extrapolated solutions, when used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_delta_extrapolated: Option<f64>,
    pub wall_seconds: f64,
}

impl RefinementRow {
    pub fn max_delta(&self) -> f64 {
        self.sup_delta_gamma
            .max(self.sup_delta_gamma_hat)
            .max(self.sup_delta_theta)
    }
}

#[derive(Debug, Error)]
pub enum MflqError {
    #[error("dimension mismatch in {field}: expected {expected:?}, found {found:?}")]
    Dimension {
        field: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("ill-posed: {what} is not invertible at s={at} (min eigenvalue {min_eig:e})")]
    IllPosed { what: String, at: f64, min_eig: f64 },
    #[error("blow-up: non-finite or unbounded value at s={time}")]
    BlowUp { time: f64 },
    #[error("no convergence after {} refinement levels", trace.len())]
    NoConvergence { trace: Vec<RefinementRow> },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl MflqError {
    pub fn dim(field: impl Into<String>, expected: (usize, usize), found: (usize, usize)) -> Self {
        MflqError::Dimension {
            field: field.into(),
            expected,
            found,
        }
    }
}
