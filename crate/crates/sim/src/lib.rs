//! Monte Carlo simulation of linear mean-field SDEs under affine feedback.
//!
//! The conditional mean entering the dynamics is propagated by its
//! deterministic ODE and re-anchored to the path value at each freeze node;
//! the state itself is advanced by Euler–Maruyama. Paths are seeded by
//! `(seed, path index)` so ensembles are reproducible and two runs with the
//! same configuration share Brownian increments.

mod config;
mod demo;
mod engine;
pub mod oracles;
mod policy;

pub use config::{InitialState, MCConfig};
pub use demo::{semigroup_failure_demo, SemigroupDemo};
pub use engine::{cost_difference, mean_stderr, CostWeights, simulate_system, write_paths_binary, LinearSystem, PathEnsemble, QuadraticCost, StepCoeffs, SummaryRow};
pub use policy::{cost_samples, estimate_cost, layered_cost_samples, problem_cost, simulate_closed_loop, simulate_policy, AffinePolicy, AffineSegment, Forcing, ProblemSystem};
