use mflq_types::linalg::{all_finite, norm_inf, symmetrize_in_place, Mat};
use mflq_types::{MflqError, Result};

use crate::grid::snapped_grid;
use crate::path::MatrixPath;

type Rhs<'a> = Box<dyn FnMut(f64, &Mat) -> Result<Mat> + 'a>;

/// Terminal-value problem `Ṁ = rhs(s, M)`, `M(terminal_time) = terminal_value`,
/// solved on `[start, terminal_time]`.
pub struct MatrixOdeProblem<'a> {
    pub rhs: Rhs<'a>,
    pub start: f64,
    pub terminal_time: f64,
    pub terminal_value: Mat,
    pub step: f64,
    pub symmetric: bool,
    /// Extra grid nodes (partition nodes, output times).
    pub required: Vec<f64>,
    /// Norm beyond which the solution counts as blown up.
    pub bound: Option<f64>,
}

impl<'a> MatrixOdeProblem<'a> {
    pub fn new(
        rhs: impl FnMut(f64, &Mat) -> Result<Mat> + 'a,
        start: f64,
        terminal_time: f64,
        terminal_value: Mat,
        step: f64,
    ) -> Self {
        MatrixOdeProblem {
            rhs: Box::new(rhs),
            start,
            terminal_time,
            terminal_value,
            step,
            symmetric: false,
            required: Vec::new(),
            bound: None,
        }
    }
}

pub fn integrate_backward(mut p: MatrixOdeProblem<'_>) -> Result<MatrixPath> {
    let grid = snapped_grid(p.start, p.terminal_time, p.step, &p.required)?;
    let bound = p.bound;
    let sym = p.symmetric;
    let mut out = integrate_backward_system(
        &grid,
        vec![p.terminal_value],
        |s, m| Ok(vec![(p.rhs)(s, &m[0])?]),
        &[sym],
        bound,
    )?;
    Ok(out.pop().unwrap())
}

/// Single-matrix version of [`integrate_backward_system`].
pub fn integrate_backward_on(
    grid: &[f64],
    terminal: Mat,
    mut rhs: impl FnMut(f64, &Mat) -> Result<Mat>,
    symmetric: bool,
) -> Result<MatrixPath> {
    let mut out = integrate_backward_system(grid, vec![terminal], |s, m| Ok(vec![rhs(s, &m[0])?]), &[symmetric], None)?;
    Ok(out.pop().unwrap())
}

fn axpy(base: &[Mat], k: &[Mat], a: f64) -> Vec<Mat> {
    base.iter().zip(k).map(|(b, k)| b + k * a).collect()
}

/// Classic RK4 from the last grid node down to the first. Components marked
/// symmetric are projected onto symmetric matrices after every step. The
/// returned paths carry the right-hand side at each node as derivative.
pub fn integrate_backward_system(
    grid: &[f64],
    terminal: Vec<Mat>,
    mut rhs: impl FnMut(f64, &[Mat]) -> Result<Vec<Mat>>,
    symmetric: &[bool],
    bound: Option<f64>,
) -> Result<Vec<MatrixPath>> {
    let n = grid.len();
    if n < 2 {
        return Err(MflqError::Config("integration grid needs two nodes".into()));
    }
    let w = terminal.len();
    let mut vals: Vec<Vec<Mat>> = vec![Vec::with_capacity(n); w];
    let mut ders: Vec<Vec<Mat>> = vec![Vec::with_capacity(n); w];
    let mut cur = terminal;
    for (c, &sym) in cur.iter_mut().zip(symmetric) {
        if sym {
            symmetrize_in_place(c);
        }
    }
    for i in (0..n - 1).rev() {
        let (s1, s0) = (grid[i + 1], grid[i]);
        let h = s1 - s0;
        let mid = s1 - 0.5 * h;
        let k1 = rhs(s1, &cur)?;
        let k2 = rhs(mid, &axpy(&cur, &k1, -0.5 * h))?;
        let k3 = rhs(mid, &axpy(&cur, &k2, -0.5 * h))?;
        let k4 = rhs(s0, &axpy(&cur, &k3, -h))?;
        let mut next: Vec<Mat> = (0..w)
            .map(|c| &cur[c] - (&k1[c] + &k2[c] * 2.0 + &k3[c] * 2.0 + &k4[c]) * (h / 6.0))
            .collect();
        for (c, m) in next.iter_mut().enumerate() {
            if symmetric.get(c).copied().unwrap_or(false) {
                symmetrize_in_place(m);
            }
            if !all_finite(m) || bound.is_some_and(|b| norm_inf(m) > b) {
                return Err(MflqError::BlowUp { time: s0 });
            }
        }
        for c in 0..w {
            vals[c].push(std::mem::replace(&mut cur[c], next[c].clone()));
            ders[c].push(k1[c].clone());
        }
        cur = next;
    }
    let k0 = rhs(grid[0], &cur)?;
    for c in 0..w {
        vals[c].push(cur[c].clone());
        ders[c].push(k0[c].clone());
    }
    Ok((0..w)
        .map(|c| {
            let mut v = std::mem::take(&mut vals[c]);
            let mut d = std::mem::take(&mut ders[c]);
            v.reverse();
            d.reverse();
            MatrixPath::new(grid.to_vec(), v, Some(d))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use mflq_types::linalg::scalar;

    #[test]
    fn zero_rhs_is_constant() {
        let p = MatrixOdeProblem::new(|_, m: &Mat| Ok(m * 0.0), 0.0, 1.0, scalar(3.0), 0.1);
        let path = integrate_backward(p).unwrap();
        assert!(path.values().iter().all(|m| m[(0, 0)] == 3.0));
        assert_eq!(path.len(), 11);
    }

    #[test]
    fn linear_integral() {
        let p = MatrixOdeProblem::new(|_, _: &Mat| Ok(scalar(-1.0)), 0.0, 1.0, scalar(0.0), 0.01);
        let path = integrate_backward(p).unwrap();
        assert!((path.first()[(0, 0)] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn scalar_riccati_half() {
        // ṗ = p², p(1) = 1 ⇒ p(s) = 1/(2 − s).
        let p = MatrixOdeProblem::new(|_, m: &Mat| Ok(m * m), 0.0, 1.0, scalar(1.0), 1.0 / 2000.0);
        let path = integrate_backward(p).unwrap();
        assert!((path.first()[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn blow_up_reports_time() {
        // ṗ = −p², p(1) = 2 gives p = 1/(s − 1/2).
        let mut p = MatrixOdeProblem::new(|_, m: &Mat| Ok(-(m * m)), 0.0, 1.0, scalar(2.0), 1e-3);
        p.bound = Some(1e6);
        match integrate_backward(p) {
            Err(MflqError::BlowUp { time }) => assert!(time > 0.45 && time < 0.55, "{time}"),
            other => panic!("{other:?}"),
        }
    }
}
