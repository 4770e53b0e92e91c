use mflq_types::linalg::Mat;
use mflq_types::{MflqError, Result};
use nalgebra::DVector;

/// Monte Carlo parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MCConfig {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl MCConfig {
    pub fn new(paths: usize, steps: usize, seed: u64) -> Self {
        MCConfig {
            paths,
            steps,
            seed,
            antithetic: false,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.paths < 2 || self.steps < 1 {
            return Err(MflqError::Config(format!(
                "need paths ≥ 2 and steps ≥ 1 (paths={}, steps={})",
                self.paths, self.steps
            )));
        }
        if self.antithetic && self.paths % 2 != 0 {
            return Err(MflqError::Config("antithetic sampling needs an even path count".into()));
        }
        Ok(())
    }
}

/// Initial state: deterministic, or Gaussian `mean + L ξ` drawn per path
/// from the path's own stream.
#[derive(Debug, Clone)]
pub enum InitialState {
    Fixed(DVector<f64>),
    Gaussian { mean: DVector<f64>, chol: Mat },
}

impl InitialState {
    pub fn fixed(x: &[f64]) -> Self {
        InitialState::Fixed(DVector::from_column_slice(x))
    }

    pub fn mean(&self) -> &DVector<f64> {
        match self {
            InitialState::Fixed(x) => x,
            InitialState::Gaussian { mean, .. } => mean,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean().len()
    }
}
