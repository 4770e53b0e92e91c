//! The backward N-player recursion over a partition: per-interval
//! mean-field Riccati pairs stitched to the Lyapunov triples of earlier
//! players, giving a closed-loop Δ-equilibrium strategy.

mod build;
mod checks;
mod local;
mod ordering;

pub use build::{build_delta_equilibrium, build_delta_equilibrium_on, game_grid, own_interval_triple, DeltaEquilibrium};
pub use checks::{gamma_hat_consistency, jump_magnitudes, JumpRow};
pub use local::{default_probes, delta_local_optimality_check, LocalCheckReport, LocalProbeRow};
pub use ordering::{ordering_check, OrderingReport, StarBounds};
