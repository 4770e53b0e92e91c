use std::sync::Arc;

use mflq_ode::{solve_lyapunov_on, Sandwich};
use mflq_types::linalg::{norm_inf, Mat};
use mflq_types::{hat, MatrixFn, ProblemData, Result};
use serde::Serialize;

use crate::build::DeltaEquilibrium;

/// Safety factor on the jump majorant (its Gronwall constant is not computed).
const SAFETY: f64 = 10.0;

#[derive(Debug, Clone, Serialize)]
pub struct JumpRow {
    pub k: usize,
    /// `sup ‖Γ_k − Γ_{k−1}‖` over `[t_{k+1}, T]`.
    pub gamma: f64,
    pub gamma_tilde: f64,
    pub gamma_hat: f64,
    /// `|ΔG| + |ΔĜ| + ∫(|ΔQ| + |ΔQ̂| + |ΔR| + |ΔR̂|)` over `[t_{k+1}, T]`.
    pub majorant: f64,
    pub within: bool,
}

/// Differences between the tails of consecutive players `k − 1` and `k`
/// (for `1 ≤ k ≤ N − 2`), with the weight-increment majorant.
pub fn jump_magnitudes(problem: &ProblemData, eq: &DeltaEquilibrium) -> Vec<JumpRow> {
    let p = problem;
    let hc = hat(p);
    let tk = eq.partition.nodes();
    let nn = eq.players();
    let mut rows = Vec::new();
    for k in 1..nn.saturating_sub(1) {
        let (mut g, mut gt, mut gh) = (0.0f64, 0.0f64, 0.0f64);
        for j in k + 1..nn {
            let (a, b) = (eq.tail(k, j), eq.tail(k - 1, j));
            for i in 0..a.gamma.len() {
                let dg = &a.gamma.values()[i] - &b.gamma.values()[i];
                let db = &a.gamma_bar.values()[i] - &b.gamma_bar.values()[i];
                g = g.max(norm_inf(&dg));
                gh = gh.max(norm_inf(&(dg + db)));
                gt = gt.max(norm_inf(&(&a.gamma_tilde.values()[i] - &b.gamma_tilde.values()[i])));
            }
        }
        let (t1, t0) = (tk[k], tk[k - 1]);
        let diff = |s: f64| {
            norm_inf(&(p.q.eval(s, t1) - p.q.eval(s, t0)))
                + norm_inf(&(hc.q.eval(s, t1) - hc.q.eval(s, t0)))
                + norm_inf(&(p.r.eval(s, t1) - p.r.eval(s, t0)))
                + norm_inf(&(hc.r.eval(s, t1) - hc.r.eval(s, t0)))
        };
        let tail = &eq.grid[eq.nodes[k + 1]..];
        let integral: f64 = tail.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (diff(w[0]) + diff(w[1]))).sum();
        let majorant = norm_inf(&(p.g.eval(t1) - p.g.eval(t0))) + norm_inf(&(hc.g.eval(t1) - hc.g.eval(t0))) + integral;
        rows.push(JumpRow {
            k,
            gamma: g,
            gamma_tilde: gt,
            gamma_hat: gh,
            majorant,
            within: g + gt <= SAFETY * majorant + 1e-12,
        });
    }
    rows
}

/// Integrate the equation of `Γ̂_ℓ = Γ_ℓ + Γ̄_ℓ` on its own (reading `Γ̃_ℓ`
/// from the stored tails) and return the largest difference from the sum.
pub fn gamma_hat_consistency(problem: &ProblemData, eq: &DeltaEquilibrium) -> Result<f64> {
    let p = problem;
    let hc = hat(p);
    let tk = eq.partition.nodes().to_vec();
    let nn = eq.players();
    let mut worst: f64 = 0.0;
    for l in 0..nn.saturating_sub(1) {
        let mut terminal = hc.g.eval(tk[l]);
        for j in (l + 1..nn).rev() {
            let sub = eq.interval_grid(j);
            let pair = Arc::new(eq.pairs[j].clone());
            let tilde = Arc::new(eq.tail(l, j).gamma_tilde.clone());
            let n = p.n;
            let (ah, bh) = (hc.a.clone(), hc.b.clone());
            let pr = pair.clone();
            let a_cl = MatrixFn::custom((n, n), move |s| {
                let th = pr.gains_at(s).expect("gain").1;
                ah.eval(s) - bh.eval(s) * th
            });
            let (chf, dhf, qh, rh, tl) = (hc.c.clone(), hc.d.clone(), hc.q.clone(), hc.r.clone(), tk[l]);
            let forcing = MatrixFn::custom((n, n), move |s| {
                let th = pair.gains_at(s).expect("gain").1;
                let ccl = chf.eval(s) - dhf.eval(s) * &th;
                qh.eval(s, tl) + ccl.transpose() * tilde.eval(s) * &ccl + th.transpose() * rh.eval(s, tl) * &th
            });
            let path = solve_lyapunov_on(&a_cl, &Sandwich::None, &forcing, &terminal, sub)?;
            let tail = eq.tail(l, j);
            for (i, v) in path.values().iter().enumerate() {
                let sum: Mat = &tail.gamma.values()[i] + &tail.gamma_bar.values()[i];
                worst = worst.max(norm_inf(&(v - sum)));
            }
            terminal = path.first().clone();
        }
    }
    Ok(worst)
}
