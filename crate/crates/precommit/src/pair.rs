use std::sync::Arc;

use mflq_ode::{riccati_gain, solve_riccati_on, MatrixPath, RiccatiCoefficients};
use mflq_types::linalg::Mat;
use mflq_types::{hat, MatrixFn, ProblemData, Result};

/// Data of the decoupled Riccati pair `(P, P̂)` with frozen weights.
#[derive(Debug, Clone)]
pub struct PairData {
    pub a: MatrixFn,
    pub b: MatrixFn,
    pub c: MatrixFn,
    pub d: MatrixFn,
    pub a_hat: MatrixFn,
    pub b_hat: MatrixFn,
    pub c_hat: MatrixFn,
    pub d_hat: MatrixFn,
    pub q: MatrixFn,
    pub r: MatrixFn,
    pub q_hat: MatrixFn,
    pub r_hat: MatrixFn,
    pub g: Mat,
    pub g_hat: Mat,
    pub delta: f64,
}

impl PairData {
    /// Weights frozen at evaluation time `t`, terminal values `G(t)`, `Ĝ(t)`.
    pub fn from_problem(p: &ProblemData, t: f64) -> Self {
        let h = hat(p);
        PairData {
            a: p.a.clone(),
            b: p.b.clone(),
            c: p.c.clone(),
            d: p.d.clone(),
            a_hat: h.a,
            b_hat: h.b,
            c_hat: h.c,
            d_hat: h.d,
            q: p.q.frozen(t),
            r: p.r.frozen(t),
            q_hat: h.q.frozen(t),
            r_hat: h.r.frozen(t),
            g: p.g.eval(t),
            g_hat: h.g.eval(t),
            delta: p.delta,
        }
    }

    fn p_coefficients(&self) -> RiccatiCoefficients {
        let mut co = RiccatiCoefficients::new(
            self.a.clone(),
            self.b.clone(),
            self.c.clone(),
            self.d.clone(),
            self.q.clone(),
            self.r.clone(),
            self.g.clone(),
        );
        co.delta = self.delta;
        co.label = "R(t)+DᵀPD".into();
        co
    }

    /// Coefficients of the `P̂` equation as a deterministic Riccati equation
    /// with cross term `D̂ᵀPĈ`, state weight `Q̂ + ĈᵀPĈ` and control weight
    /// `R̂ + D̂ᵀPD̂`.
    fn p_hat_coefficients(&self, p: &MatrixPath) -> RiccatiCoefficients {
        let (n, m) = self.b.shape();
        let path = Arc::new(p.clone());
        let (c, d) = (self.c_hat.clone(), self.d_hat.clone());
        let pth = path.clone();
        let (c1, d1) = (c.clone(), d.clone());
        let s = MatrixFn::custom((m, n), move |s| d1.eval(s).transpose() * pth.eval(s) * c1.eval(s));
        let pth = path.clone();
        let (c2, q) = (c.clone(), self.q_hat.clone());
        let qq = MatrixFn::custom((n, n), move |s| {
            let cm = c2.eval(s);
            q.eval(s) + cm.transpose() * pth.eval(s) * cm
        });
        let pth = path;
        let (d3, r) = (d, self.r_hat.clone());
        let rr = MatrixFn::custom((m, m), move |s| {
            let dm = d3.eval(s);
            r.eval(s) + dm.transpose() * pth.eval(s) * dm
        });
        RiccatiCoefficients {
            a: self.a_hat.clone(),
            b: self.b_hat.clone(),
            c: MatrixFn::zeros(n, n),
            d: MatrixFn::zeros(n, m),
            s,
            q: qq,
            r: rr,
            g: self.g_hat.clone(),
            delta: self.delta,
            label: "R̂(t)+D̂ᵀPD̂".into(),
        }
    }
}

/// Solution of the pair on one grid, with gains
/// `Θ = [R + DᵀPD]⁻¹[BᵀP + DᵀPC]` and `Θ̂ = [R̂ + D̂ᵀPD̂]⁻¹[B̂ᵀP̂ + D̂ᵀPĈ]`.
#[derive(Debug, Clone)]
pub struct RiccatiPair {
    pub p: MatrixPath,
    pub p_hat: MatrixPath,
    pub theta: MatrixPath,
    pub theta_hat: MatrixPath,
    pub max_residual: f64,
    p_co: Arc<RiccatiCoefficients>,
    p_hat_co: Arc<RiccatiCoefficients>,
}

impl RiccatiPair {
    /// Gains at any `s`, from the interpolated Riccati solutions.
    pub fn gains_at(&self, s: f64) -> Result<(Mat, Mat)> {
        Ok((
            riccati_gain(&self.p_co, s, &self.p.eval(s))?,
            riccati_gain(&self.p_hat_co, s, &self.p_hat.eval(s))?,
        ))
    }

    /// The gains as functions of `s` (evaluation panics only if the gain
    /// was ill-posed, which the solve already rules out at the nodes).
    pub fn gain_fns(&self) -> (MatrixFn, MatrixFn) {
        let shape = self.theta.first().shape();
        let (co, p) = (self.p_co.clone(), Arc::new(self.p.clone()));
        let th = MatrixFn::custom(shape, move |s| riccati_gain(&co, s, &p.eval(s)).expect("gain"));
        let (co, p) = (self.p_hat_co.clone(), Arc::new(self.p_hat.clone()));
        let th_hat = MatrixFn::custom(shape, move |s| riccati_gain(&co, s, &p.eval(s)).expect("gain"));
        (th, th_hat)
    }
}

/// Solve `P` on `grid`, then `P̂` reading `P` by Hermite interpolation.
pub fn solve_riccati_pair(data: &PairData, grid: &[f64]) -> Result<RiccatiPair> {
    let p_co = data.p_coefficients();
    let p = solve_riccati_on(&p_co, grid)?;
    let p_hat_co = data.p_hat_coefficients(&p.p);
    let ph = solve_riccati_on(&p_hat_co, grid)?;
    Ok(RiccatiPair {
        max_residual: p.max_residual.max(ph.max_residual),
        p: p.p,
        p_hat: ph.p,
        theta: p.theta,
        theta_hat: ph.theta,
        p_co: Arc::new(p_co),
        p_hat_co: Arc::new(p_hat_co),
    })
}
