use crate::error::{MflqError, Result};
use crate::func::MatrixFn;
use crate::grid::TimeGrid;
use crate::linalg::Mat;

/// Partition-indexed feedback pair `(Θ^Δ, Θ̂^Δ)`. Interval `k` owns
/// `[t_k, t_{k+1})`; each per-interval function must be valid on the closed
/// interval so that left limits can be taken at `t_{k+1}`.
#[derive(Debug, Clone)]
pub struct PiecewiseGain {
    partition: TimeGrid,
    theta: Vec<MatrixFn>,
    theta_hat: Vec<MatrixFn>,
}

impl PiecewiseGain {
    pub fn new(partition: TimeGrid, theta: Vec<MatrixFn>, theta_hat: Vec<MatrixFn>) -> Result<Self> {
        let n = partition.intervals();
        if theta.len() != n || theta_hat.len() != n {
            return Err(MflqError::Config(format!(
                "gain needs {n} interval functions, got {} and {}",
                theta.len(),
                theta_hat.len()
            )));
        }
        let shape = theta[0].shape();
        if theta.iter().chain(&theta_hat).any(|f| f.shape() != shape) {
            return Err(MflqError::dim("gain", shape, (0, 0)));
        }
        Ok(PiecewiseGain {
            partition,
            theta,
            theta_hat,
        })
    }

    /// Time-constant pair on `[0, T]`.
    pub fn constant(horizon: f64, theta: Mat, theta_hat: Mat) -> Result<Self> {
        PiecewiseGain::new(
            TimeGrid::uniform(horizon, 1)?,
            vec![MatrixFn::Constant(theta)],
            vec![MatrixFn::Constant(theta_hat)],
        )
    }

    pub fn partition(&self) -> &TimeGrid {
        &self.partition
    }

    /// `(m, n)` shape of the gains.
    pub fn shape(&self) -> (usize, usize) {
        self.theta[0].shape()
    }

    pub fn theta_fn(&self, k: usize) -> &MatrixFn {
        &self.theta[k]
    }

    pub fn theta_hat_fn(&self, k: usize) -> &MatrixFn {
        &self.theta_hat[k]
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, s: f64) -> (Mat, Mat) {
        self.eval_in(self.partition.interval_of(s), s)
    }

    /// Evaluate interval `k`'s functions at `s` (left limits at the right end).
    pub fn eval_in(&self, k: usize, s: f64) -> (Mat, Mat) {
        (self.theta[k].eval(s), self.theta_hat[k].eval(s))
    }
}
