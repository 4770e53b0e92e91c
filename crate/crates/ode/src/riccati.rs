use mflq_types::linalg::{is_psd, min_eig, norm2, norm_inf, spd_solve, tau_psd, tau_res, Mat};
use mflq_types::{MatrixFn, MflqError, Result};

use crate::grid::snapped_grid;
use crate::integrate::integrate_backward_on;
use crate::path::MatrixPath;

/// Coefficients of `Ṗ + P𝒜 + 𝒜ᵀP + 𝒞ᵀP𝒞 + 𝒬 − (P𝓑 + 𝒮ᵀ + 𝒞ᵀP𝒟)[ℛ + 𝒟ᵀP𝒟]⁻¹(𝓑ᵀP + 𝒮 + 𝒟ᵀP𝒞) = 0`.
#[derive(Debug, Clone)]
pub struct RiccatiCoefficients {
    pub a: MatrixFn,
    pub b: MatrixFn,
    pub c: MatrixFn,
    pub d: MatrixFn,
    /// m×n cross term.
    pub s: MatrixFn,
    pub q: MatrixFn,
    pub r: MatrixFn,
    pub g: Mat,
    pub delta: f64,
    /// Name of `ℛ + 𝒟ᵀP𝒟` used in error messages.
    pub label: String,
}

impl RiccatiCoefficients {
    /// No cross term, `δ = 1`.
    pub fn new(a: MatrixFn, b: MatrixFn, c: MatrixFn, d: MatrixFn, q: MatrixFn, r: MatrixFn, g: Mat) -> Self {
        let (n, m) = b.shape();
        RiccatiCoefficients {
            a,
            b,
            c,
            d,
            s: MatrixFn::zeros(m, n),
            q,
            r,
            g,
            delta: 1.0,
            label: "R+DᵀPD".into(),
        }
    }

    /// Sampled check of `ℛ ⪰ δI`, `𝒬 − 𝒮ᵀℛ⁻¹𝒮 ⪰ 0`, `𝒢 ⪰ 0`.
    pub fn check(&self, times: &[f64]) -> Result<()> {
        if !is_psd(&self.g) {
            return Err(MflqError::Precondition("terminal weight is not positive semidefinite".into()));
        }
        for &s in times {
            let r = self.r.eval(s);
            let lam = min_eig(&r);
            if lam - self.delta < -tau_psd(&r) {
                return Err(MflqError::Precondition(format!("ℛ not ⪰ δI at s={s} (min eigenvalue {lam:e})")));
            }
            let sm = self.s.eval(s);
            let q = self.q.eval(s);
            let schur = match spd_solve(&r, &sm, 0.0) {
                Ok(x) => &q - sm.transpose() * x,
                Err(l) => return Err(MflqError::IllPosed { what: "ℛ".into(), at: s, min_eig: l }),
            };
            if min_eig(&schur) < -tau_psd(&q) {
                return Err(MflqError::Precondition(format!("𝒬 − 𝒮ᵀℛ⁻¹𝒮 not ⪰ 0 at s={s}")));
            }
        }
        Ok(())
    }
}

/// Gain `Θ = [ℛ + 𝒟ᵀP𝒟]⁻¹[𝓑ᵀP + 𝒮 + 𝒟ᵀP𝒞]` at time `s`.
pub fn riccati_gain(co: &RiccatiCoefficients, s: f64, p: &Mat) -> Result<Mat> {
    let (b, c, d) = (co.b.eval(s), co.c.eval(s), co.d.eval(s));
    let dtp = d.transpose() * p;
    let k = co.r.eval(s) + &dtp * &d;
    let l = b.transpose() * p + co.s.eval(s) + &dtp * &c;
    spd_solve(&k, &l, 0.5 * co.delta).map_err(|lam| MflqError::IllPosed {
        what: co.label.clone(),
        at: s,
        min_eig: lam,
    })
}

/// `Ṗ` from the Riccati equation.
pub fn riccati_rhs(co: &RiccatiCoefficients, s: f64, p: &Mat) -> Result<Mat> {
    let (a, b, c, d) = (co.a.eval(s), co.b.eval(s), co.c.eval(s), co.d.eval(s));
    let dtp = d.transpose() * p;
    let k = co.r.eval(s) + &dtp * &d;
    let l = b.transpose() * p + co.s.eval(s) + &dtp * &c;
    let theta = spd_solve(&k, &l, 0.5 * co.delta).map_err(|lam| MflqError::IllPosed {
        what: co.label.clone(),
        at: s,
        min_eig: lam,
    })?;
    let pa = p * &a;
    let f = &pa + pa.transpose() + c.transpose() * p * &c + co.q.eval(s) - l.transpose() * theta;
    Ok(-f)
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub p: MatrixPath,
    /// Gain at every node (linear interpolation off-node).
    pub theta: MatrixPath,
    /// Max midpoint residual of the ODE.
    pub max_residual: f64,
    pub residual_tol: f64,
}

pub fn solve_riccati(co: &RiccatiCoefficients, start: f64, end: f64, h: f64) -> Result<RiccatiSolution> {
    let grid = snapped_grid(start, end, h, &[])?;
    solve_riccati_on(co, &grid)
}

/// Solve on a given grid; asserts `P ⪰ 0` at every node.
pub fn solve_riccati_on(co: &RiccatiCoefficients, grid: &[f64]) -> Result<RiccatiSolution> {
    co.check(grid)?;
    let p = integrate_backward_on(grid, co.g.clone(), |s, p| riccati_rhs(co, s, p), true)?;
    for (&s, v) in grid.iter().zip(p.values()) {
        if !is_psd(v) {
            return Err(MflqError::Invariant(format!("Riccati solution not ⪰ 0 at s={s}")));
        }
    }
    let theta: Vec<Mat> = grid
        .iter()
        .zip(p.values())
        .map(|(&s, v)| riccati_gain(co, s, v))
        .collect::<Result<_>>()?;
    let theta = MatrixPath::new(grid.to_vec(), theta, None);
    let max_residual = midpoint_residual(&p, |s, m| riccati_rhs(co, s, m))?;
    let residual_tol = tau_res(p.max_norm());
    Ok(RiccatiSolution {
        p,
        theta,
        max_residual,
        residual_tol,
    })
}

/// `max ‖(P_{i+1} − P_i)/h − F(mid, P(mid))‖` over grid intervals.
pub(crate) fn midpoint_residual(p: &MatrixPath, mut f: impl FnMut(f64, &Mat) -> Result<Mat>) -> Result<f64> {
    let t = p.times();
    let v = p.values();
    let mut worst: f64 = 0.0;
    for i in 0..t.len() - 1 {
        let h = t[i + 1] - t[i];
        let mid = t[i] + 0.5 * h;
        let fd = (&v[i + 1] - &v[i]) / h;
        let r = fd - f(mid, &p.eval(mid))?;
        worst = worst.max(norm_inf(&r));
    }
    Ok(worst)
}

/// `K₀ = (|𝒢| + L‖𝒬‖∞) e^{L‖𝒜 + 𝒜ᵀ + 𝒞ᵀ𝒞‖∞}` with `L = end − start`,
/// spectral norms, sup over `samples + 1` equally spaced times.
pub fn k0_bound(co: &RiccatiCoefficients, start: f64, end: f64, samples: usize) -> f64 {
    let samples = samples.max(1);
    let len = end - start;
    let mut qn: f64 = 0.0;
    let mut en: f64 = 0.0;
    for i in 0..=samples {
        let s = start + len * i as f64 / samples as f64;
        let a = co.a.eval(s);
        let c = co.c.eval(s);
        qn = qn.max(norm2(&co.q.eval(s)));
        en = en.max(norm2(&(&a + a.transpose() + c.transpose() * &c)));
    }
    let g = norm2(&co.g);
    (g + len * qn) * (len * en).exp()
}
