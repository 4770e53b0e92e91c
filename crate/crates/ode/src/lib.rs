//! Fixed-step backward RK4 for matrix ODEs posed with terminal values:
//! generic systems, Lyapunov and Riccati equations, and the diagonal-coupled
//! two-parameter march shared by the equilibrium solvers.

mod diagonal;
mod grid;
mod integrate;
mod lyapunov;
mod path;
mod riccati;

pub use diagonal::{march_diagonal, DiagonalField, DiagonalMarch};
pub use grid::{default_step, snapped_grid, uniform_grid};
pub use integrate::{integrate_backward, integrate_backward_on, integrate_backward_system, MatrixOdeProblem};
pub use lyapunov::{solve_lyapunov, solve_lyapunov_on, Sandwich};
pub use path::MatrixPath;
pub use riccati::{k0_bound, riccati_gain, riccati_rhs, solve_riccati, solve_riccati_on, RiccatiCoefficients, RiccatiSolution};
