//! Open-loop equilibrium for problems whose dynamics carry no mean-field
//! terms: the diagonal-coupled two-parameter Riccati system, its feedback
//! and Monte Carlo checks of the equilibrium property.

mod solve;
mod verify;

pub use solve::{solve_open_loop, OpenLoopSolution};
pub use verify::{
    bsde_residual_check, default_probes, verify_open_loop_equilibrium, BsdeResidual, Probe, ProbeRow, VerifyReport,
};
