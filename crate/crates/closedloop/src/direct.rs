use mflq_ode::{march_diagonal, snapped_grid, DiagonalMarch, MatrixPath};
use mflq_types::linalg::Mat;
use mflq_types::{hat, ProblemData, Result, TimeGrid, TwoParamMatrixField};

use crate::solution::{gains_from_diagonal, ClosedLoopSolution};

/// March the system directly on one grid of step at most `h`: all slices
/// `t ↦ (Γ(·,t), Γ̂(·,t))` move together, coupled through `Θ̂(s)` taken from
/// the diagonal. Slices are kept at up to 65 evenly spaced t-nodes.
pub fn direct_diagonal_solve(problem: &ProblemData, h: f64) -> Result<ClosedLoopSolution> {
    let p = problem;
    p.check_shapes()?;
    let hc = hat(p);
    let horizon = p.horizon;
    let grid = snapped_grid(0.0, horizon, h, &[])?;
    let steps = grid.len() - 1;
    let stride = if steps % 64 == 0 { steps / 64 } else { 1 };
    let terminal = |t: f64| vec![p.g.eval(t), hc.g.eval(t)];
    let factor = |s: f64, d: &[Mat]| -> Result<Mat> { Ok(gains_from_diagonal(p, &hc, s, &d[0], &d[1])?.1) };
    let rhs = |s: f64, t: f64, th: &Mat, v: &[Mat]| -> Vec<Mat> {
        let acl = hc.a.eval(s) - hc.b.eval(s) * th;
        let ccl = hc.c.eval(s) - hc.d.eval(s) * th;
        let tht = th.transpose();
        let lyap = |x: &Mat| {
            let xa = x * &acl;
            xa.transpose() + xa
        };
        let sand = ccl.transpose() * &v[0] * &ccl;
        vec![
            -(lyap(&v[0]) + &sand + p.q.eval(s, t) + &tht * p.r.eval(s, t) * th),
            -(lyap(&v[1]) + &sand + hc.q.eval(s, t) + &tht * hc.r.eval(s, t) * th),
        ]
    };
    let field = march_diagonal(&DiagonalMarch {
        grid: &grid,
        symmetric: true,
        terminal: &terminal,
        factor: &factor,
        rhs: &rhs,
        stride,
    })?;
    let mut gamma = Vec::with_capacity(field.kept.len());
    let mut gamma_hat = Vec::with_capacity(field.kept.len());
    for sl in field.slices {
        let mut it = sl.into_iter();
        gamma.push(it.next().unwrap());
        gamma_hat.push(it.next().unwrap());
    }
    let (theta, theta_hat): (Vec<Mat>, Vec<Mat>) = grid
        .iter()
        .zip(&field.diagonal)
        .map(|(&s, d)| gains_from_diagonal(p, &hc, s, &d[0], &d[1]))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(ClosedLoopSolution {
        gamma: TwoParamMatrixField::new(grid.clone(), field.kept.clone(), gamma)?,
        gamma_hat: TwoParamMatrixField::new(grid.clone(), field.kept, gamma_hat)?,
        theta: MatrixPath::new(grid.clone(), theta, None),
        theta_hat: MatrixPath::new(grid, theta_hat, None),
        partition: TimeGrid::uniform(horizon, 1)?,
        convergence_trace: Vec::new(),
    })
}
