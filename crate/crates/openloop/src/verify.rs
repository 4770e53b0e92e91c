use serde::Serialize;

use mflq_ode::snapped_grid;
use mflq_sim::{
    cost_difference, simulate_policy, simulate_system, AffinePolicy, CostWeights, InitialState, LinearSystem, MCConfig,
    QuadraticCost, StepCoeffs,
};
use mflq_types::linalg::{norm2, Mat};
use mflq_types::{hat, MflqError, ProblemData, Result};

use crate::solve::OpenLoopSolution;

/// Control used on the spike interval `[t, t + ε)`.
#[derive(Debug, Clone)]
pub enum Probe {
    /// `u = v` (m×1).
    Constant(Mat),
    /// `u = −K X` (m×n).
    Feedback(Mat),
}

impl Probe {
    pub fn label(&self) -> String {
        let fmt = |m: &Mat| m.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",");
        match self {
            Probe::Constant(v) => format!("constant[{}]", fmt(v)),
            Probe::Feedback(k) => format!("feedback[{}]", fmt(k)),
        }
    }
}

/// Constant controls `±1` and the feedbacks `u = 0` and `u = −𝟙X`.
pub fn default_probes(n: usize, m: usize) -> Vec<Probe> {
    vec![
        Probe::Constant(Mat::from_element(m, 1, 1.0)),
        Probe::Constant(Mat::from_element(m, 1, -1.0)),
        Probe::Feedback(Mat::zeros(m, n)),
        Probe::Feedback(Mat::from_element(m, n, 1.0)),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub probe: String,
    pub t: f64,
    pub epsilon: f64,
    pub ratio_estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub rows: Vec<ProbeRow>,
    /// Smallest `ratio + 3·stderr` over probes and times at the smallest ε.
    pub min_ratio: f64,
    pub tol_stat: f64,
    pub passes: bool,
    /// Every (probe, t) estimate is monotone in ε up to two standard errors.
    pub monotone: bool,
}

fn blocks(m11: &Mat, m12: &Mat, m21: &Mat, m22: &Mat) -> Mat {
    let (r1, c1) = m11.shape();
    let (r2, c2) = m22.shape();
    let mut out = Mat::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(m11);
    out.view_mut((0, c1), (r1, c2)).copy_from(m12);
    out.view_mut((r1, 0), (r2, c1)).copy_from(m21);
    out.view_mut((r1, c1), (r2, c2)).copy_from(m22);
    out
}

fn pad(m: &Mat) -> Mat {
    let n = m.nrows();
    let z = Mat::zeros(n, n);
    blocks(m, &z, &z, &z)
}

/// Coefficients of the pair `(X^ε, X*)`: the first block follows the probe
/// before `spike_end` and the equilibrium control process afterwards.
fn spike_coeffs(p: &ProblemData, sol: &OpenLoopSolution, probe: Option<&Probe>, s: f64) -> StepCoeffs {
    let (n, m) = (p.n, p.m);
    let (a, b, c, d) = (p.a.eval(s), p.b.eval(s), p.c.eval(s), p.d.eval(s));
    let th = sol.theta_at(s);
    let (acl, ccl) = (&a - &b * &th, &c - &d * &th);
    let zn = Mat::zeros(n, n);
    let mut out = StepCoeffs::zeros(2 * n, m);
    match probe {
        None => {
            out.fx = blocks(&a, &(-(&b * &th)), &zn, &acl);
            out.gx = blocks(&c, &(-(&d * &th)), &zn, &ccl);
            out.ux.view_mut((0, n), (m, n)).copy_from(&(-&th));
        }
        Some(Probe::Constant(v)) => {
            out.fx = blocks(&a, &zn, &zn, &acl);
            out.gx = blocks(&c, &zn, &zn, &ccl);
            out.f0.view_mut((0, 0), (n, 1)).copy_from(&(&b * v));
            out.g0.view_mut((0, 0), (n, 1)).copy_from(&(&d * v));
            out.u0 = v.clone();
        }
        Some(Probe::Feedback(k)) => {
            out.fx = blocks(&(&a - &b * k), &zn, &zn, &acl);
            out.gx = blocks(&(&c - &d * k), &zn, &zn, &ccl);
            out.ux.view_mut((0, 0), (m, n)).copy_from(&(-k));
        }
    }
    out
}

/// Monte Carlo check of the open-loop equilibrium inequality. Each time in
/// `times` is used as an initial time with state `x0`; for every probe and
/// spike width the quotient `[J(spiked) − J(equilibrium)]/ε` is estimated
/// with common random numbers.
pub fn verify_open_loop_equilibrium(
    problem: &ProblemData,
    solution: &OpenLoopSolution,
    x0: &[f64],
    times: &[f64],
    eps_list: &[f64],
    probes: &[Probe],
    mc: &MCConfig,
) -> Result<VerifyReport> {
    mc.check()?;
    let p = problem;
    let n = p.n;
    if x0.len() != n {
        return Err(MflqError::dim("x0", (n, 1), (x0.len(), 1)));
    }
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(MflqError::Config("spike widths must be positive".into()));
    }
    let horizon = p.horizon;
    let start: Vec<f64> = x0.iter().chain(x0).copied().collect();
    let mut rows = Vec::new();
    for &t in times {
        let widths: Vec<f64> = eps_list.iter().copied().filter(|&e| t + e < horizon - 1e-12).collect();
        if widths.is_empty() {
            continue;
        }
        let ends: Vec<f64> = widths.iter().map(|&e| t + e).collect();
        let grid = snapped_grid(t, horizon, (horizon - t) / mc.steps as f64, &ends)?;
        let steps = grid.len() - 1;
        let cost = QuadraticCost::new(
            &grid,
            |s| CostWeights {
                q: pad(&p.q.eval(s, t)),
                qs: pad(&p.q_bar.eval(s, t)),
                qp: Mat::zeros(2 * n, 2 * n),
                r: p.r.eval(s, t),
                rs: p.r_bar.eval(s, t),
                rp: Mat::zeros(p.m, p.m),
            },
            pad(&p.g.eval(t)),
            pad(&p.g_bar.eval(t)),
            Mat::zeros(2 * n, 2 * n),
        );
        let cfg = MCConfig { steps, ..*mc };
        let run = |probe: Option<(&Probe, f64)>| -> Result<Vec<f64>> {
            let sys = LinearSystem::new(
                2 * n,
                p.m,
                grid.clone(),
                vec![false; steps],
                InitialState::fixed(&start),
                |i, s| {
                    let active = probe.and_then(|(pr, end)| (grid[i] < end - 1e-12).then_some(pr));
                    spike_coeffs(p, solution, active, s)
                },
            )?;
            let ens = simulate_system(sys, &cfg, Some(&cost), false)?;
            Ok(ens.unit_costs().unwrap_or_default().to_vec())
        };
        let base = run(None)?;
        for probe in probes {
            for (&eps, &end) in widths.iter().zip(&ends) {
                let spiked = run(Some((probe, end)))?;
                let (diff, se) = cost_difference(&spiked, &base)?;
                rows.push(ProbeRow {
                    probe: probe.label(),
                    t,
                    epsilon: eps,
                    ratio_estimate: diff / eps,
                    stderr: se / eps,
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(MflqError::Config("no admissible (t, ε) pair inside the horizon".into()));
    }
    let smallest = rows.iter().map(|r| r.epsilon).fold(f64::INFINITY, f64::min);
    let at_smallest: Vec<&ProbeRow> = rows.iter().filter(|r| r.epsilon == smallest).collect();
    let min_ratio = at_smallest.iter().map(|r| r.ratio_estimate).fold(f64::INFINITY, f64::min);
    let tol_stat = 1e-3 + 3.0 * at_smallest.iter().map(|r| r.stderr).fold(0.0, f64::max);
    let passes = at_smallest.iter().all(|r| r.ratio_estimate >= -(1e-3 + 3.0 * r.stderr));
    let mut monotone = true;
    for (i, a) in rows.iter().enumerate() {
        if rows[..i].iter().any(|r| r.probe == a.probe && r.t == a.t) {
            continue;
        }
        let mut trend: Vec<&ProbeRow> = rows.iter().filter(|r| r.probe == a.probe && r.t == a.t).collect();
        trend.sort_by(|x, y| y.epsilon.total_cmp(&x.epsilon));
        let slack = |x: &ProbeRow, y: &ProbeRow| 2.0 * (x.stderr + y.stderr);
        let up = trend.windows(2).all(|w| w[1].ratio_estimate >= w[0].ratio_estimate - slack(w[0], w[1]));
        let down = trend.windows(2).all(|w| w[1].ratio_estimate <= w[0].ratio_estimate + slack(w[0], w[1]));
        monotone &= up || down;
    }
    Ok(VerifyReport {
        rows,
        min_ratio,
        tol_stat,
        passes,
        monotone,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BsdeResidual {
    pub times: Vec<f64>,
    /// Largest residual norm at each sampled time.
    pub max_by_time: Vec<f64>,
    pub max_abs: f64,
    pub max_rel: f64,
}

/// Path-wise stationarity residual `R̂u* + BᵀY + DᵀZ` at sampled times,
/// with `Y = P̂(t,t)X*`, `Z = P(t,t)(CX* + Du*)` along simulated paths.
pub fn bsde_residual_check(
    problem: &ProblemData,
    solution: &OpenLoopSolution,
    x0: InitialState,
    mc: &MCConfig,
    samples: usize,
) -> Result<BsdeResidual> {
    let p = problem;
    let hc = hat(p);
    let policy = AffinePolicy::from_gains(&solution.gain()?);
    let ens = simulate_policy(p, &policy, None, 0.0, x0, mc, true)?;
    let grid = ens.times().to_vec();
    let every = (mc.steps / samples.max(1)).max(1);
    let mut times = Vec::new();
    let mut max_by_time = Vec::new();
    let mut max_rel: f64 = 0.0;
    for i in (0..grid.len()).step_by(every) {
        let s = grid[i];
        let (b, c, d) = (p.b.eval(s), p.c.eval(s), p.d.eval(s));
        let rh = hc.r.eval(s, s);
        let th = solution.theta_at(s);
        let pp = solution.p_diag.eval(s);
        let ph = solution.p_hat_diag.eval(s);
        let bt = b.transpose();
        let dt = d.transpose();
        let mut worst: f64 = 0.0;
        for path in 0..mc.paths {
            let x = Mat::from_column_slice(p.n, 1, ens.state(path, i).unwrap_or(&[]));
            let u = -(&th * &x);
            let y = &ph * &x;
            let z = &pp * (&c * &x + &d * &u);
            let terms = [&rh * &u, &bt * &y, &dt * &z];
            let res = norm2(&(&terms[0] + &terms[1] + &terms[2]));
            let scale: f64 = terms.iter().map(norm2).sum::<f64>();
            worst = worst.max(res);
            if scale > 0.0 {
                max_rel = max_rel.max(res / scale);
            }
        }
        times.push(s);
        max_by_time.push(worst);
    }
    let max_abs = max_by_time.iter().copied().fold(0.0, f64::max);
    Ok(BsdeResidual {
        times,
        max_by_time,
        max_abs,
        max_rel,
    })
}
