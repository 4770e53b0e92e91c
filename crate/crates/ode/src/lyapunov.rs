use mflq_types::linalg::Mat;
use mflq_types::{MatrixFn, Result};

use crate::grid::snapped_grid;
use crate::integrate::integrate_backward_on;
use crate::path::MatrixPath;

/// Quadratic term of a Lyapunov equation: none, `𝒞ᵀΠ𝒞` on the unknown, or
/// `𝒞ᵀX𝒞` with a fixed external `X(·)`.
#[derive(Debug, Clone)]
pub enum Sandwich {
    None,
    Own(MatrixFn),
    External { c: MatrixFn, inner: MatrixFn },
}

/// `Π̇ + Π𝒜 + 𝒜ᵀΠ + 𝒞ᵀΠ𝒞 + forcing = 0`, `Π(end) = 𝒢`.
pub fn solve_lyapunov(
    a: &MatrixFn,
    c: Option<&MatrixFn>,
    forcing: &MatrixFn,
    g: &Mat,
    start: f64,
    end: f64,
    h: f64,
) -> Result<MatrixPath> {
    let grid = snapped_grid(start, end, h, &[])?;
    let sw = match c {
        Some(c) => Sandwich::Own(c.clone()),
        None => Sandwich::None,
    };
    solve_lyapunov_on(a, &sw, forcing, g, &grid)
}

pub fn solve_lyapunov_on(
    a: &MatrixFn,
    sandwich: &Sandwich,
    forcing: &MatrixFn,
    g: &Mat,
    grid: &[f64],
) -> Result<MatrixPath> {
    integrate_backward_on(
        grid,
        g.clone(),
        |s, p| {
            let am = a.eval(s);
            let pa = p * &am;
            let mut f = &pa + pa.transpose() + forcing.eval(s);
            match sandwich {
                Sandwich::None => {}
                Sandwich::Own(c) => {
                    let cm = c.eval(s);
                    f += cm.transpose() * p * &cm;
                }
                Sandwich::External { c, inner } => {
                    let cm = c.eval(s);
                    f += cm.transpose() * inner.eval(s) * &cm;
                }
            }
            Ok(-f)
        },
        true,
    )
}
