//! Scalar closed forms used as test fixtures.

use std::sync::Arc;

use mflq_ode::{solve_riccati, MatrixPath, RiccatiCoefficients};
use mflq_types::linalg::{mat, scalar};
use mflq_types::{MatrixFn, ProblemData, Result, TwoTimeMatrixFn};

/// `dX = u ds + X dW` with cost `E_t[∫|u|² ds + |E_t X(T)|²]`.
pub fn ex12_problem(horizon: f64) -> ProblemData {
    let mut p = ProblemData::new(1, 1, horizon);
    p.b = MatrixFn::constant(mat(&[&[1.0]]));
    p.c = MatrixFn::constant(mat(&[&[1.0]]));
    p.g_bar = MatrixFn::constant(mat(&[&[1.0]]));
    p
}

/// `P̂(s) = 1/(T−s+1)`.
pub fn ex12_p_hat(horizon: f64, s: f64) -> f64 {
    1.0 / (horizon - s + 1.0)
}

/// `E_t[X*(s)] = (T−s+1)/(T−t+1) x`.
pub fn ex12_cond_mean(horizon: f64, t: f64, s: f64, x: f64) -> f64 {
    (horizon - s + 1.0) / (horizon - t + 1.0) * x
}

/// The constant optimal control `−x/(T−t+1)`.
pub fn ex12_control(horizon: f64, t: f64, x: f64) -> f64 {
    -x / (horizon - t + 1.0)
}

/// Optimal value `x²/(T−t+1)`.
pub fn ex12_value(horizon: f64, t: f64, x: f64) -> f64 {
    x * x / (horizon - t + 1.0)
}

/// `dX = u ds + X dW` with cost `E_t[∫ρ(s,t)|u|² ds + g(t)|X(T)|²]`.
#[derive(Clone)]
pub struct Example11 {
    pub horizon: f64,
    pub rho: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Example11 {
    pub fn new(
        horizon: f64,
        rho: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Example11 {
            horizon,
            rho: Arc::new(rho),
            g: Arc::new(g),
        }
    }

    /// `P(·, t)` from `P_s + P − P²/ρ(s,t) = 0`, `P(T,t) = g(t)`.
    pub fn riccati(&self, t: f64, h: f64) -> Result<MatrixPath> {
        let rho = self.rho.clone();
        let one = || MatrixFn::constant(mat(&[&[1.0]]));
        let mut co = RiccatiCoefficients::new(
            MatrixFn::zeros(1, 1),
            one(),
            one(),
            MatrixFn::zeros(1, 1),
            MatrixFn::zeros(1, 1),
            MatrixFn::custom((1, 1), move |s| scalar(rho(s, t))),
            scalar((self.g)(t)),
        );
        let floor = (0..=64)
            .map(|i| (self.rho)(t + (self.horizon - t) * i as f64 / 64.0, t))
            .fold(f64::INFINITY, f64::min);
        co.delta = 0.5 * floor;
        Ok(solve_riccati(&co, t, self.horizon, h)?.p)
    }

    /// Samples of `t ↦ g(t)/ρ(T,t)` on `samples + 1` points of `[0, T]`.
    pub fn witness(&self, samples: usize) -> Vec<f64> {
        (0..=samples)
            .map(|i| {
                let t = self.horizon * i as f64 / samples as f64;
                (self.g)(t) / (self.rho)(self.horizon, t)
            })
            .collect()
    }

    /// True when the witness ratio is constant (to rounding).
    pub fn time_consistent(&self) -> bool {
        let w = self.witness(64);
        let scale = w.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        w.iter().all(|v| (v - w[0]).abs() <= 1e-12 * scale)
    }

    /// The same problem in matrix form, for the solvers.
    pub fn problem(&self) -> ProblemData {
        let mut p = ProblemData::new(1, 1, self.horizon);
        p.b = MatrixFn::constant(mat(&[&[1.0]]));
        p.c = MatrixFn::constant(mat(&[&[1.0]]));
        let rho = self.rho.clone();
        p.r = TwoTimeMatrixFn::custom((1, 1), move |s, t| scalar(rho(s, t)));
        let g = self.g.clone();
        p.g = MatrixFn::custom((1, 1), move |t| scalar(g(t)));
        p
    }
}

/// Scalar coefficients of `dX = (aX + ā E_t X + b) ds + (cX + c̄ E_t X + σ) dW`.
#[derive(Clone)]
pub struct ScalarMfSde {
    pub a: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub a_bar: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub c: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub c_bar: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub b: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub sigma: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ScalarMfSde {
    pub fn constant(a: f64, a_bar: f64, c: f64, c_bar: f64, b: f64, sigma: f64) -> Self {
        ScalarMfSde {
            a: Arc::new(move |_| a),
            a_bar: Arc::new(move |_| a_bar),
            c: Arc::new(move |_| c),
            c_bar: Arc::new(move |_| c_bar),
            b: Arc::new(move |_| b),
            sigma: Arc::new(move |_| sigma),
        }
    }

    /// `E_t X` on the grid `t + k h`, by RK4.
    pub fn mean(&self, t: f64, x: f64, h: f64, steps: usize) -> Vec<f64> {
        let f = |s: f64, m: f64| ((self.a)(s) + (self.a_bar)(s)) * m + (self.b)(s);
        let mut out = vec![x];
        let mut m = x;
        for k in 0..steps {
            let s = t + k as f64 * h;
            let k1 = f(s, m);
            let k2 = f(s + 0.5 * h, m + 0.5 * h * k1);
            let k3 = f(s + 0.5 * h, m + 0.5 * h * k2);
            let k4 = f(s + h, m + h * k3);
            m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            out.push(m);
        }
        out
    }

    /// Variation-of-constants representation on the grid `t + k h` driven by
    /// the increments `dw`: `X = Ψ[x + ∫Ψ⁻¹(f − c g) dr + ∫Ψ⁻¹ g dW]` with
    /// `f = ā E_t X + b`, `g = c̄ E_t X + σ` and `Ψ` the exponential
    /// fundamental solution of `{a, c}`. Integrals are Itô left sums.
    pub fn variation_of_constants(&self, t: f64, x: f64, h: f64, dw: &[f64]) -> Vec<f64> {
        let mean = self.mean(t, x, h, dw.len());
        let mut log_psi = 0.0f64;
        let mut inner = x;
        let mut out = vec![x];
        for (k, &w) in dw.iter().enumerate() {
            let s = t + k as f64 * h;
            let (c, cb) = ((self.c)(s), (self.c_bar)(s));
            let psi_inv = (-log_psi).exp();
            let f = (self.a_bar)(s) * mean[k] + (self.b)(s);
            let g = cb * mean[k] + (self.sigma)(s);
            inner += psi_inv * ((f - c * g) * h + g * w);
            log_psi += ((self.a)(s) - 0.5 * c * c) * h + c * w;
            out.push(log_psi.exp() * inner);
        }
        out
    }

    /// Euler–Maruyama on the same increments, with the exact mean.
    pub fn euler(&self, t: f64, x: f64, h: f64, dw: &[f64]) -> Vec<f64> {
        let mean = self.mean(t, x, h, dw.len());
        let mut z = x;
        let mut out = vec![x];
        for (k, &w) in dw.iter().enumerate() {
            let s = t + k as f64 * h;
            let drift = (self.a)(s) * z + (self.a_bar)(s) * mean[k] + (self.b)(s);
            let diff = (self.c)(s) * z + (self.c_bar)(s) * mean[k] + (self.sigma)(s);
            z += drift * h + diff * w;
            out.push(z);
        }
        out
    }
}
