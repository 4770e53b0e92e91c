use serde::Serialize;

use crate::error::{MflqError, Result};

/// Partition `0 = t_0 < t_1 < ⋯ < t_N = T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

/// Relative tolerance used when matching times against grid nodes.
pub(crate) const NODE_EPS: f64 = 1e-10;

impl TimeGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(MflqError::Config("a grid needs at least two nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(MflqError::Config(format!("grid must start at 0, got {}", nodes[0])));
        }
        if !nodes.iter().all(|x| x.is_finite()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MflqError::Config("grid nodes must be finite and strictly increasing".into()));
        }
        Ok(TimeGrid { nodes })
    }

    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if n == 0 || !(horizon > 0.0) {
            return Err(MflqError::Config(format!("uniform grid needs N ≥ 1 and T > 0 (N={n}, T={horizon})")));
        }
        let mut nodes: Vec<f64> = (0..=n).map(|k| horizon * k as f64 / n as f64).collect();
        nodes[n] = horizon;
        TimeGrid::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Number of intervals N.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn mesh(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Index k with `s ∈ [t_k, t_{k+1})`; the last interval is closed.
    pub fn interval_of(&self, s: f64) -> usize {
        let n = self.intervals();
        let k = self.nodes.partition_point(|&x| x <= s + NODE_EPS * (1.0 + x.abs()));
        k.saturating_sub(1).min(n - 1)
    }

    /// ρ^Δ(s): the left node of the interval containing s.
    pub fn freeze(&self, s: f64) -> f64 {
        self.nodes[self.interval_of(s)]
    }

    /// Index of the node equal to `s` (within a relative tolerance).
    pub fn node_index(&self, s: f64) -> Option<usize> {
        let tol = NODE_EPS * (1.0 + self.horizon().abs());
        self.nodes.iter().position(|&x| (x - s).abs() <= tol)
    }

    /// Uniform bisection of every interval.
    pub fn refine(&self) -> TimeGrid {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(self.horizon());
        TimeGrid { nodes }
    }
}
