//! Small dense linear-algebra helpers and the numeric tolerances shared by
//! every solver.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;

/// Symmetry tolerance (relative).
pub const TAU_SYM: f64 = 1e-9;

/// Induced infinity norm (max absolute row sum).
pub fn norm_inf(m: &Mat) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// PSD tolerance for a matrix of this size.
pub fn tau_psd(m: &Mat) -> f64 {
    1e-10 * (1.0 + norm_inf(m))
}

/// Residual tolerance relative to the solution scale.
pub fn tau_res(scale: f64) -> f64 {
    1e-6 * (1.0 + scale)
}

pub fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn asymmetry(m: &Mat) -> f64 {
    norm_inf(&(m - m.transpose()))
}

pub fn symmetrize_in_place(m: &mut Mat) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn min_eig(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    sym(m).symmetric_eigenvalues().min()
}

pub fn max_eig(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    sym(m).symmetric_eigenvalues().max()
}

/// Spectral norm.
pub fn norm2(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// `m ⪰ 0` up to `tau_psd`.
pub fn is_psd(m: &Mat) -> bool {
    min_eig(m) >= -tau_psd(m)
}

/// Solve `m X = rhs` for symmetric positive definite `m`, refusing when the
/// smallest eigenvalue is below `floor`. On refusal the offending eigenvalue
/// is returned.
pub fn spd_solve(m: &Mat, rhs: &Mat, floor: f64) -> std::result::Result<Mat, f64> {
    let ms = sym(m);
    let lam = min_eig(&ms);
    if !(lam >= floor) {
        return Err(lam);
    }
    match ms.cholesky() {
        Some(ch) => Ok(ch.solve(rhs)),
        None => Err(lam),
    }
}

pub fn quad(m: &Mat, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}

pub fn scalar(x: f64) -> Mat {
    Mat::from_element(1, 1, x)
}

/// Build a matrix from row slices.
pub fn mat(rows: &[&[f64]]) -> Mat {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    Mat::from_fn(r, c, |i, j| rows[i][j])
}

pub fn zeros(r: usize, c: usize) -> Mat {
    Mat::zeros(r, c)
}

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}
