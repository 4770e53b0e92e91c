//! Closed-loop equilibrium: the symmetric two-parameter Riccati system for
//! `(Γ, Γ̂)`, obtained as the limit of the N-player game under uniform
//! refinement and cross-checked by a direct diagonal-coupled march.

mod direct;
mod refine;
mod solution;

pub use direct::direct_diagonal_solve;
pub use refine::{game_level, level_grid, refinement_study, solve_closed_loop, Refinement};
pub use solution::{equilibrium_value, residual, ClosedLoopSolution, Residual};
