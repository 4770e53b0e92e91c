//! Pre-commitment solution of the mean-field LQ problem at a fixed initial
//! time, its Lyapunov upper bounds, and the quadratic-cost representation by
//! three linear matrix ODEs.

mod bounds;
mod layered;
mod pair;
mod solve;

pub use bounds::{precommit_bounds, BoundChecks, BoundsReport};
pub use layered::{cost_via_lyapunov, layered_rhs, lyapunov_triple, CostEvaluator, LayeredWeights, LyapunovTriple, MeanFieldGenerator};
pub use pair::{solve_riccati_pair, PairData, RiccatiPair};
pub use solve::{master_grid, solve_precommitment, PrecommitSolution};
