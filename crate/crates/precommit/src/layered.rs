use mflq_ode::{integrate_backward_system, snapped_grid, MatrixPath};
use mflq_types::linalg::Mat;
use mflq_types::{MatrixFn, MflqError, Result};
use nalgebra::DVector;

/// Homogeneous mean-field dynamics `dX = (𝒜X + 𝒜̄E_tX)ds + (𝒞X + 𝒞̄E_tX)dW`.
#[derive(Debug, Clone)]
pub struct MeanFieldGenerator {
    pub a: MatrixFn,
    pub a_bar: MatrixFn,
    pub c: MatrixFn,
    pub c_bar: MatrixFn,
}

/// Running weights on `X`, `E_t X` and `E_τ X`, terminal weights on `X(T)`
/// and `E_τ X(T)`.
#[derive(Debug, Clone)]
pub struct LayeredWeights {
    pub q: MatrixFn,
    pub q_tilde: MatrixFn,
    pub q_bar: MatrixFn,
    pub g: Mat,
    pub g_bar: Mat,
}

/// `(Γ̃, Γ, Γ̄)` on one interval.
#[derive(Debug, Clone)]
pub struct LyapunovTriple {
    pub gamma_tilde: MatrixPath,
    pub gamma: MatrixPath,
    pub gamma_bar: MatrixPath,
}

impl LyapunovTriple {
    /// `Γ + Γ̄`.
    pub fn gamma_hat(&self) -> MatrixPath {
        let g = &self.gamma_bar;
        self.gamma.map(|s, v| v + g.eval(s))
    }
}

/// Right-hand sides `[Γ̃̇, Γ̇, Γ̄̇]` given the coefficient values at one time.
#[allow(clippy::too_many_arguments)]
pub fn layered_rhs(a: &Mat, a_bar: &Mat, c: &Mat, c_bar: &Mat, q: &Mat, q_tilde: &Mat, q_bar: &Mat, v: &[Mat]) -> Vec<Mat> {
    let (gt, g, gb) = (&v[0], &v[1], &v[2]);
    let ah = a + a_bar;
    let ch = c + c_bar;
    let lyap = |x: &Mat, m: &Mat| {
        let xm = x * m;
        xm.transpose() + xm
    };
    vec![
        -(lyap(gt, a) + c.transpose() * gt * c + q),
        -(lyap(g, &ah) + ch.transpose() * gt * &ch + q + q_tilde),
        -(lyap(gb, &ah) + q_bar),
    ]
}

/// Integrate the three equations jointly on `grid`.
pub fn lyapunov_triple(gen: &MeanFieldGenerator, w: &LayeredWeights, grid: &[f64]) -> Result<LyapunovTriple> {
    let paths = integrate_backward_system(
        grid,
        vec![w.g.clone(), w.g.clone(), w.g_bar.clone()],
        |s, v| {
            Ok(layered_rhs(
                &gen.a.eval(s),
                &gen.a_bar.eval(s),
                &gen.c.eval(s),
                &gen.c_bar.eval(s),
                &w.q.eval(s),
                &w.q_tilde.eval(s),
                &w.q_bar.eval(s),
                v,
            ))
        },
        &[true, true, true],
        None,
    )?;
    let mut it = paths.into_iter();
    Ok(LyapunovTriple {
        gamma_tilde: it.next().unwrap(),
        gamma: it.next().unwrap(),
        gamma_bar: it.next().unwrap(),
    })
}

/// Quadratic cost `E_τ⟨Γ(t)x, x⟩ + ⟨Γ̄(t)E_τx, E_τx⟩`.
#[derive(Debug, Clone)]
pub struct CostEvaluator {
    pub gamma: Mat,
    pub gamma_bar: Mat,
    pub triple: LyapunovTriple,
}

impl CostEvaluator {
    /// Cost for an initial state with `E_τ[x xᵀ] = second_moment` and
    /// `E_τ[x] = mean`.
    pub fn eval(&self, second_moment: &Mat, mean: &[f64]) -> f64 {
        let m = DVector::from_column_slice(mean);
        (&self.gamma * second_moment).trace() + (m.transpose() * &self.gamma_bar * &m)[(0, 0)]
    }

    /// Cost for a deterministic initial state.
    pub fn eval_point(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        self.eval(&(&v * v.transpose()), x)
    }
}

/// Solve the triple on `[t, T]` with step `h` and return the evaluator.
pub fn cost_via_lyapunov(gen: &MeanFieldGenerator, w: &LayeredWeights, t: f64, horizon: f64, h: f64) -> Result<CostEvaluator> {
    let n = w.g.nrows();
    let shapes = [gen.a.shape(), gen.a_bar.shape(), gen.c.shape(), gen.c_bar.shape(), w.q.shape(), w.q_tilde.shape(), w.q_bar.shape()];
    if let Some(bad) = shapes.iter().find(|s| **s != (n, n)) {
        return Err(MflqError::dim("generator/weights", (n, n), *bad));
    }
    let grid = snapped_grid(t, horizon, h, &[])?;
    let triple = lyapunov_triple(gen, w, &grid)?;
    Ok(CostEvaluator {
        gamma: triple.gamma.first().clone(),
        gamma_bar: triple.gamma_bar.first().clone(),
        triple,
    })
}
