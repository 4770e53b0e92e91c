use std::time::Instant;

use mflq_game::{build_delta_equilibrium_on, own_interval_triple};
use mflq_ode::MatrixPath;
use mflq_types::linalg::{norm_inf, Mat};
use mflq_types::{hat, validate, MflqError, ProblemData, RefinementRow, Result, TimeGrid, TwoParamMatrixField};
use serde::Serialize;

use crate::solution::{gains_from_diagonal, ClosedLoopSolution};

/// Uniform refinement `N = N₀, 2N₀, …, 2^max_doublings·N₀`, stopped once
/// consecutive levels differ by less than `tol` in sup norm. With
/// `extrapolate`, fields are combined as `2F_{2N} − F_N` before comparing.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Refinement {
    pub n0: usize,
    pub max_doublings: usize,
    pub tol: f64,
    pub extrapolate: bool,
}

impl Default for Refinement {
    fn default() -> Self {
        Refinement {
            n0: 4,
            max_doublings: 6,
            tol: 1e-4,
            extrapolate: true,
        }
    }
}

/// Base number of s-steps and the minimum per interval.
const BASE_STEPS: usize = 1024;
const MIN_PER_INTERVAL: usize = 16;

/// Uniform s-grid for `n` intervals: `n·2^e` steps with `2^e` the smallest
/// power of two giving at least `BASE_STEPS` steps and `MIN_PER_INTERVAL`
/// per interval. Grids of `n` and `2n` are nested.
pub fn level_grid(horizon: f64, n: usize) -> Vec<f64> {
    let need = BASE_STEPS.div_ceil(n).max(MIN_PER_INTERVAL);
    let steps = n * need.next_power_of_two();
    (0..=steps).map(|i| horizon * i as f64 / steps as f64).collect()
}

/// Attach gains to fields whose t-slices sit at the partition nodes and
/// at T. Inside interval k the diagonal is slice t_k plus the jump to the
/// next diagonal value spread linearly over the interval.
fn with_gains(
    p: &ProblemData,
    partition: TimeGrid,
    grid: Vec<f64>,
    t_index: Vec<usize>,
    gamma: Vec<Vec<Mat>>,
    gamma_hat: Vec<Vec<Mat>>,
) -> Result<ClosedLoopSolution> {
    let hc = hat(p);
    let tk = partition.nodes();
    let n = partition.intervals();
    let mut theta = Vec::with_capacity(grid.len());
    let mut theta_hat = Vec::with_capacity(grid.len());
    let mut k = 0;
    for (i, &s) in grid.iter().enumerate() {
        while k + 1 < n && i >= t_index[k + 1] {
            k += 1;
        }
        let j = i - t_index[k];
        let end = t_index[k + 1] - t_index[k];
        let w = (s - tk[k]) / (tk[k + 1] - tk[k]);
        let diag = |f: &[Vec<Mat>]| &f[k][j] + (&f[k + 1][0] - &f[k][end]) * w;
        let (th, thh) = gains_from_diagonal(p, &hc, s, &diag(&gamma), &diag(&gamma_hat))?;
        theta.push(th);
        theta_hat.push(thh);
    }
    Ok(ClosedLoopSolution {
        gamma: TwoParamMatrixField::new(grid.clone(), t_index.clone(), gamma)?,
        gamma_hat: TwoParamMatrixField::new(grid.clone(), t_index, gamma_hat)?,
        theta: MatrixPath::new(grid.clone(), theta, None),
        theta_hat: MatrixPath::new(grid, theta_hat, None),
        partition,
        convergence_trace: Vec::new(),
    })
}

/// Fields of the game on `n` uniform intervals. The slice at `τ = t_k`
/// is player k's cost matrix on `[t_k, T]` under the equilibrium (the tail
/// from the recursion, continued over interval k with the equilibrium
/// gains); the slice at `τ = T` is `(G(T), Ĝ(T))`.
pub fn game_level(problem: &ProblemData, n: usize) -> Result<ClosedLoopSolution> {
    let p = problem;
    let partition = TimeGrid::uniform(p.horizon, n)?;
    let grid = level_grid(p.horizon, n);
    let last = grid.len() - 1;
    let eq = build_delta_equilibrium_on(p, &partition, &grid)?;
    let mut gamma = Vec::with_capacity(n + 1);
    let mut gamma_hat = Vec::with_capacity(n + 1);
    for k in 0..n {
        let own = own_interval_triple(p, &eq, k)?;
        let mut g: Vec<Mat> = own.gamma.values().to_vec();
        let mut gh: Vec<Mat> = g.iter().zip(own.gamma_bar.values()).map(|(a, b)| a + b).collect();
        for i in eq.nodes[k + 1] + 1..=last {
            g.push(eq.gamma(k, i));
            gh.push(eq.gamma_hat(k, i));
        }
        gamma.push(g);
        gamma_hat.push(gh);
    }
    gamma.push(vec![p.g.eval(p.horizon)]);
    gamma_hat.push(vec![hat(p).g.eval(p.horizon)]);
    let mut t_index = eq.nodes[..n].to_vec();
    t_index.push(last);
    with_gains(p, partition, grid, t_index, gamma, gamma_hat)
}

/// `2·fine − coarse` for the fields on the coarse nodes, with the gains
/// recomputed from the extrapolated slices by the same diagonal rule.
fn extrapolate(problem: &ProblemData, coarse: &ClosedLoopSolution, fine: &ClosedLoopSolution) -> Result<ClosedLoopSolution> {
    let grid = coarse.grid().to_vec();
    let ratio = (fine.grid().len() - 1) / (grid.len() - 1);
    if ratio * (grid.len() - 1) != fine.grid().len() - 1 {
        return Err(MflqError::Config("extrapolation needs nested grids".into()));
    }
    let combine = |c: &TwoParamMatrixField, f: &TwoParamMatrixField| -> Result<Vec<Vec<Mat>>> {
        c.t_nodes()
            .into_iter()
            .enumerate()
            .map(|(j, t)| {
                let jf = f.t_slot(t).ok_or_else(|| MflqError::Config("extrapolation needs nested partitions".into()))?;
                let i0 = c.t_index()[j];
                Ok((i0..grid.len()).map(|i| f.at(i * ratio, jf) * 2.0 - c.at(i, j)).collect())
            })
            .collect()
    };
    with_gains(
        problem,
        coarse.partition.clone(),
        grid.clone(),
        coarse.gamma.t_index().to_vec(),
        combine(&coarse.gamma, &fine.gamma)?,
        combine(&coarse.gamma_hat, &fine.gamma_hat)?,
    )
}

/// The extrapolated fields with the fine level's gains restricted to the
/// coarse nodes. Where the raw gains already converge faster than first
/// order this is the better of the two estimates.
fn with_fine_gains(x: &ClosedLoopSolution, fine: &ClosedLoopSolution) -> ClosedLoopSolution {
    let grid = x.grid().to_vec();
    let ratio = (fine.grid().len() - 1) / (grid.len() - 1);
    let restrict = |m: &MatrixPath| MatrixPath::new(grid.clone(), (0..grid.len()).map(|i| m.values()[i * ratio].clone()).collect(), None);
    ClosedLoopSolution {
        theta: restrict(&fine.theta),
        theta_hat: restrict(&fine.theta_hat),
        ..x.clone()
    }
}

/// Sup-norm distance of two gain paths at the nodes of `coarse`.
fn path_delta(coarse: &MatrixPath, fine: &MatrixPath) -> f64 {
    coarse
        .times()
        .iter()
        .zip(coarse.values())
        .filter_map(|(&s, v)| fine.node_index(s).map(|i| norm_inf(&(v - &fine.values()[i]))))
        .fold(0.0, f64::max)
}

fn deltas(coarse: &ClosedLoopSolution, fine: &ClosedLoopSolution) -> Result<[f64; 3]> {
    Ok([
        coarse.gamma.sup_diff(&fine.gamma)?,
        coarse.gamma_hat.sup_diff(&fine.gamma_hat)?,
        path_delta(&coarse.theta_hat, &fine.theta_hat),
    ])
}

fn check_monotone(p: &ProblemData) -> Result<()> {
    if p.monotone {
        let rep = validate(p, 64)?;
        if let Some(v) = rep.violations.iter().find(|v| v.hypothesis == "H3") {
            return Err(MflqError::Precondition(format!("monotonicity requested but violated: {}", v.message)));
        }
    }
    Ok(())
}

/// Walk the levels, returning the trace and the last compared solution.
/// Stops once the raw delta (returning the finer level) or the
/// extrapolated delta (returning the extrapolated fields) is below `tol`;
/// `tol = 0` walks every level.
fn walk(problem: &ProblemData, r: &Refinement) -> Result<(Vec<RefinementRow>, Option<ClosedLoopSolution>, bool)> {
    if r.n0 == 0 {
        return Err(MflqError::Config("N0 must be positive".into()));
    }
    let mut trace = Vec::new();
    let mut prev: Option<ClosedLoopSolution> = None;
    let mut prev_x: Option<[ClosedLoopSolution; 2]> = None;
    let mut last_x: Option<ClosedLoopSolution> = None;
    for j in 0..=r.max_doublings {
        let n = r.n0 << j;
        let clock = Instant::now();
        let level = game_level(problem, n)?;
        let Some(coarse) = prev.take() else {
            prev = Some(level);
            continue;
        };
        let [dg, dgh, dth] = deltas(&coarse, &level)?;
        let mut row = RefinementRow {
            n,
            sup_delta_gamma: dg,
            sup_delta_gamma_hat: dgh,
            sup_delta_theta: dth,
            sup_delta_extrapolated: None,
            wall_seconds: 0.0,
        };
        row.wall_seconds = clock.elapsed().as_secs_f64();
        if row.max_delta() < r.tol {
            trace.push(row);
            return Ok((trace, Some(level), true));
        }
        if r.extrapolate {
            // Two extrapolated candidates share the fields and differ in the
            // gains; the first whose successive delta drops below tol wins.
            let x = extrapolate(problem, &coarse, &level)?;
            let xf = with_fine_gains(&x, &level);
            let mut best = None;
            if let Some([px, pxf]) = &prev_x {
                let d = deltas(px, &x)?.into_iter().fold(0.0, f64::max);
                let df = deltas(pxf, &xf)?.into_iter().fold(0.0, f64::max);
                row.sup_delta_extrapolated = Some(d.min(df));
                best = Some(d <= df);
            }
            row.wall_seconds = clock.elapsed().as_secs_f64();
            let done = row.sup_delta_extrapolated.is_some_and(|d| d < r.tol);
            trace.push(row);
            if done {
                let sol = if best == Some(true) { x } else { xf };
                return Ok((trace, Some(sol), true));
            }
            last_x = Some(if best == Some(false) { xf.clone() } else { x.clone() });
            prev_x = Some([x, xf]);
        } else {
            trace.push(row);
        }
        prev = Some(level);
    }
    let last = if r.extrapolate { last_x } else { prev };
    Ok((trace, last, false))
}

/// Refinement deltas for every doubling, without a stopping rule.
pub fn refinement_study(problem: &ProblemData, n0: usize, doublings: usize, extrapolate: bool) -> Result<Vec<RefinementRow>> {
    problem.check_shapes()?;
    let r = Refinement {
        n0,
        max_doublings: doublings,
        tol: 0.0,
        extrapolate,
    };
    Ok(walk(problem, &r)?.0)
}

/// Game limit with a Cauchy stopping rule on `(Γ, Γ̂, Θ̂)`.
pub fn solve_closed_loop(problem: &ProblemData, refinement: &Refinement) -> Result<ClosedLoopSolution> {
    problem.check_shapes()?;
    check_monotone(problem)?;
    match walk(problem, refinement)? {
        (trace, Some(mut sol), true) => {
            sol.convergence_trace = trace;
            Ok(sol)
        }
        (trace, _, _) => Err(MflqError::NoConvergence { trace }),
    }
}
