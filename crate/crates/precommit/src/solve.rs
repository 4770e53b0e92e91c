use mflq_ode::{snapped_grid, MatrixPath};
use mflq_types::linalg::{quad, Mat};
use mflq_types::{MatrixFn, MflqError, ProblemData, Result};
use nalgebra::DVector;

use crate::pair::{solve_riccati_pair, PairData, RiccatiPair};

/// Uniform grid of step at most `h` on `[0, T]`.
pub fn master_grid(horizon: f64, h: f64) -> Result<Vec<f64>> {
    snapped_grid(0.0, horizon, h, &[])
}

/// Pre-commitment solution at initial time `t`.
#[derive(Debug, Clone)]
pub struct PrecommitSolution {
    /// Initial time actually used (a master-grid node).
    pub t: f64,
    /// Distance from the requested initial time.
    pub snap: f64,
    pub pair: RiccatiPair,
}

impl PrecommitSolution {
    pub fn p(&self) -> &MatrixPath {
        &self.pair.p
    }

    pub fn p_hat(&self) -> &MatrixPath {
        &self.pair.p_hat
    }

    pub fn theta(&self) -> &MatrixPath {
        &self.pair.theta
    }

    pub fn theta_hat(&self) -> &MatrixPath {
        &self.pair.theta_hat
    }

    /// `⟨P̂(t)x, x⟩`.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        quad(self.pair.p_hat.first(), &DVector::from_column_slice(x))
    }

    /// Gain functions on `[t, T]` for simulation.
    pub fn gain_fns(&self) -> (MatrixFn, MatrixFn) {
        self.pair.gain_fns()
    }

    pub fn p_hat_at_start(&self) -> &Mat {
        self.pair.p_hat.first()
    }
}

/// Solve the Riccati pair with weights frozen at `t` (snapped to the
/// nearest node of the master grid of step `h`).
pub fn solve_precommitment(problem: &ProblemData, t: f64, h: f64) -> Result<PrecommitSolution> {
    problem.check_shapes()?;
    let horizon = problem.horizon;
    if !(0.0..horizon).contains(&t) {
        return Err(MflqError::Config(format!("initial time {t} outside [0, T)")));
    }
    let grid = master_grid(horizon, h)?;
    let k = grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap())
        .map(|(k, _)| k)
        .unwrap()
        .min(grid.len() - 2);
    let ts = grid[k];
    let pair = solve_riccati_pair(&PairData::from_problem(problem, ts), &grid[k..])?;
    Ok(PrecommitSolution {
        t: ts,
        snap: (ts - t).abs(),
        pair,
    })
}
