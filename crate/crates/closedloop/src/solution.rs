use mflq_ode::MatrixPath;
use mflq_types::linalg::{norm_inf, quad, spd_solve, Mat};
use mflq_types::{hat, HatCoefficients, MatrixFn, MflqError, PiecewiseGain, ProblemData, RefinementRow, Result, TimeGrid, TwoParamMatrixField};
use nalgebra::DVector;
use serde::Serialize;

/// Equilibrium fields on a shared s-grid.
#[derive(Debug, Clone)]
pub struct ClosedLoopSolution {
    pub gamma: TwoParamMatrixField,
    pub gamma_hat: TwoParamMatrixField,
    /// `Θ̂(s) = [R̂(s,s) + D̂ᵀΓ(s,s)D̂]⁻¹[B̂ᵀΓ̂(s,s) + D̂ᵀΓ(s,s)Ĉ]` at every s-node.
    pub theta_hat: MatrixPath,
    /// Auxiliary `Θ(s) = [R(s,s) + D̂ᵀΓ(s,s)D̂]⁻¹[B̂ᵀΓ(s,s) + D̂ᵀΓ(s,s)Ĉ]`.
    pub theta: MatrixPath,
    /// Partition of the last game level (a single interval for the direct march).
    pub partition: TimeGrid,
    pub convergence_trace: Vec<RefinementRow>,
}

impl ClosedLoopSolution {
    pub fn grid(&self) -> &[f64] {
        self.gamma.s_grid()
    }

    /// `⟨Γ̂(t,t)x, x⟩` at the t-node nearest `t`, with the snap distance.
    pub fn value_at(&self, t: f64, x: &[f64]) -> (f64, f64) {
        let (j, snap) = self.gamma_hat.snap_t(t);
        (quad(self.gamma_hat.diag(j), &DVector::from_column_slice(x)), snap)
    }

    /// Pure feedback `u = −Θ̂X` for simulation, with the conditional mean in
    /// the dynamics re-anchored at `intervals` uniform nodes. Many intervals
    /// approach the equilibrium dynamics, where every later time conditions
    /// afresh; one interval gives the dynamics seen by a pre-committed player.
    pub fn gain(&self, intervals: usize) -> Result<PiecewiseGain> {
        let th = MatrixFn::samples(self.theta_hat.times().to_vec(), self.theta_hat.values().to_vec());
        let horizon = *self.grid().last().unwrap();
        PiecewiseGain::new(TimeGrid::uniform(horizon, intervals)?, vec![th.clone(); intervals], vec![th; intervals])
    }

    /// `s ↦ Γ̂(s,s)` at the t-nodes.
    pub fn value_diagonal(&self) -> Vec<(f64, Mat)> {
        self.gamma_hat
            .t_nodes()
            .into_iter()
            .enumerate()
            .map(|(j, t)| (t, self.gamma_hat.diag(j).clone()))
            .collect()
    }
}

pub fn equilibrium_value(sol: &ClosedLoopSolution, t: f64, x: &[f64]) -> (f64, f64) {
    sol.value_at(t, x)
}

/// `(Θ, Θ̂)` from diagonal values of `(Γ, Γ̂)`.
pub(crate) fn gains_from_diagonal(
    p: &ProblemData,
    hc: &HatCoefficients,
    s: f64,
    gamma: &Mat,
    gamma_hat: &Mat,
) -> Result<(Mat, Mat)> {
    let (bh, ch, dh) = (hc.b.eval(s), hc.c.eval(s), hc.d.eval(s));
    let dtg = dh.transpose() * gamma;
    let cross = &dtg * &ch;
    let dgd = &dtg * &dh;
    let ill = |what: &str| {
        let what = what.to_string();
        move |lam| MflqError::IllPosed {
            what,
            at: s,
            min_eig: lam,
        }
    };
    let theta_hat = spd_solve(&(hc.r.eval(s, s) + &dgd), &(bh.transpose() * gamma_hat + &cross), 0.5 * p.delta)
        .map_err(ill("R̂(s,s)+D̂ᵀΓ(s,s)D̂"))?;
    let theta = spd_solve(&(p.r.eval(s, s) + &dgd), &(bh.transpose() * gamma + &cross), 0.0)
        .map_err(ill("R(s,s)+D̂ᵀΓ(s,s)D̂"))?;
    Ok((theta, theta_hat))
}

/// Maximum residuals of the two equations at interior nodes, from central
/// differences in s. `gamma` uses `Θ̂` throughout; `gamma_aux` is the
/// Γ-equation with the auxiliary `Θ` in the running cost `ΘᵀR(s,t)Θ`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Residual {
    pub gamma: f64,
    pub gamma_aux: f64,
    pub gamma_hat: f64,
}

impl Residual {
    pub fn max(&self) -> f64 {
        self.gamma.max(self.gamma_hat)
    }
}

/// Nodes next to a partition node are skipped: the game gains jump there.
pub fn residual(sol: &ClosedLoopSolution, problem: &ProblemData) -> Residual {
    let p = problem;
    let hc = hat(p);
    let grid = sol.grid();
    let last = grid.len() - 1;
    let on_partition = |s: f64| sol.partition.node_index(s).is_some();
    let mut out = Residual {
        gamma: 0.0,
        gamma_aux: 0.0,
        gamma_hat: 0.0,
    };
    for (j, t) in sol.gamma.t_nodes().into_iter().enumerate() {
        let i0 = sol.gamma.t_index()[j];
        let (g, gh) = (sol.gamma.slice(j), sol.gamma_hat.slice(j));
        for i in i0 + 1..last {
            let s = grid[i];
            if on_partition(s) {
                continue;
            }
            let w = grid[i + 1] - grid[i - 1];
            let dg = (&g[i + 1 - i0] - &g[i - 1 - i0]) / w;
            let dgh = (&gh[i + 1 - i0] - &gh[i - 1 - i0]) / w;
            let (gm, ghm) = (&g[i - i0], &gh[i - i0]);
            let th_hat = &sol.theta_hat.values()[i];
            let th = &sol.theta.values()[i];
            let acl = hc.a.eval(s) - hc.b.eval(s) * th_hat;
            let ccl = hc.c.eval(s) - hc.d.eval(s) * th_hat;
            let lyap = |x: &Mat| {
                let xa = x * &acl;
                xa.transpose() + xa
            };
            let sand = ccl.transpose() * gm * &ccl;
            let core = &dg + lyap(gm) + &sand + p.q.eval(s, t);
            let r = p.r.eval(s, t);
            let r_gamma = &core + th_hat.transpose() * &r * th_hat;
            let r_aux = &core + th.transpose() * &r * th;
            let r_hat = &dgh + lyap(ghm) + &sand + hc.q.eval(s, t) + th_hat.transpose() * hc.r.eval(s, t) * th_hat;
            out.gamma = out.gamma.max(norm_inf(&r_gamma));
            out.gamma_aux = out.gamma_aux.max(norm_inf(&r_aux));
            out.gamma_hat = out.gamma_hat.max(norm_inf(&r_hat));
        }
    }
    out
}
