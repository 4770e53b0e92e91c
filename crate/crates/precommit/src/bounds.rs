use mflq_ode::{solve_lyapunov_on, MatrixPath, Sandwich};
use mflq_types::linalg::{min_eig, tau_psd};
use mflq_types::{MatrixFn, ProblemData, Result};
use serde::Serialize;
use std::sync::Arc;

use crate::pair::PairData;
use crate::solve::{solve_precommitment, PrecommitSolution};

/// Lyapunov upper bounds `Π`, `Π̂` and the eigenvalue checks
/// `0 ⪯ P ⪯ Π`, `0 ⪯ P̂ ⪯ Π̂`.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub pi: MatrixPath,
    pub pi_hat: MatrixPath,
    pub checks: BoundChecks,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundChecks {
    pub min_eig_p: f64,
    pub min_eig_pi_minus_p: f64,
    pub min_eig_p_hat: f64,
    pub min_eig_pi_hat_minus_p_hat: f64,
    /// Largest `τ_psd` used over the nodes.
    pub tolerance: f64,
    pub holds: bool,
}

/// `Π̇ + ΠA + AᵀΠ + CᵀΠC + Q(·,t) = 0`, `Π(T) = G(t)`, and
/// `Π̂̇ + Π̂Â + ÂᵀΠ̂ + ĈᵀΠĈ + Q̂(·,t) = 0`, `Π̂(T) = Ĝ(t)`, compared with the
/// pre-commitment solution on the same grid.
pub fn precommit_bounds(problem: &ProblemData, t: f64, h: f64) -> Result<(PrecommitSolution, BoundsReport)> {
    let sol = solve_precommitment(problem, t, h)?;
    let data = PairData::from_problem(problem, sol.t);
    let grid = sol.pair.p.times().to_vec();
    let pi = solve_lyapunov_on(&data.a, &Sandwich::Own(data.c.clone()), &data.q, &data.g, &grid)?;
    let n = problem.n;
    let inner = Arc::new(pi.clone());
    let pi_fn = MatrixFn::custom((n, n), move |s| inner.eval(s));
    let pi_hat = solve_lyapunov_on(
        &data.a_hat,
        &Sandwich::External {
            c: data.c_hat.clone(),
            inner: pi_fn,
        },
        &data.q_hat,
        &data.g_hat,
        &grid,
    )?;
    let mut c = BoundChecks {
        min_eig_p: f64::INFINITY,
        min_eig_pi_minus_p: f64::INFINITY,
        min_eig_p_hat: f64::INFINITY,
        min_eig_pi_hat_minus_p_hat: f64::INFINITY,
        tolerance: 0.0,
        holds: true,
    };
    for i in 0..grid.len() {
        let (p, ph) = (&sol.pair.p.values()[i], &sol.pair.p_hat.values()[i]);
        let (u, uh) = (&pi.values()[i], &pi_hat.values()[i]);
        let tol = tau_psd(u).max(tau_psd(uh));
        c.tolerance = c.tolerance.max(tol);
        c.min_eig_p = c.min_eig_p.min(min_eig(p));
        c.min_eig_p_hat = c.min_eig_p_hat.min(min_eig(ph));
        let g1 = min_eig(&(u - p));
        let g2 = min_eig(&(uh - ph));
        c.min_eig_pi_minus_p = c.min_eig_pi_minus_p.min(g1);
        c.min_eig_pi_hat_minus_p_hat = c.min_eig_pi_hat_minus_p_hat.min(g2);
        if min_eig(p) < -tol || min_eig(ph) < -tol || g1 < -tol || g2 < -tol {
            c.holds = false;
        }
    }
    Ok((sol, BoundsReport { pi, pi_hat, checks: c }))
}
