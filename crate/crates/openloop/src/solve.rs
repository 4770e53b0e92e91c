use mflq_ode::{march_diagonal, snapped_grid, DiagonalMarch, MatrixPath};
use mflq_types::linalg::{norm_inf, Mat};
use mflq_types::{hat, MatrixFn, MflqError, PiecewiseGain, ProblemData, Result, TimeGrid, TwoParamMatrixField};

/// Largest number of t-slices kept in the output fields.
const MAX_KEPT: usize = 256;

#[derive(Debug, Clone)]
pub struct OpenLoopSolution {
    pub p: TwoParamMatrixField,
    pub p_hat: TwoParamMatrixField,
    /// `P(t, t)` and `P̂(t, t)` at every grid node.
    pub p_diag: MatrixPath,
    pub p_hat_diag: MatrixPath,
    /// `Θ(t) = [R̂(t,t) + DᵀP(t,t)D]⁻¹[BᵀP̂(t,t) + DᵀP(t,t)C]`; `u* = −Θ X*`.
    pub theta: MatrixPath,
    pub max_asymmetry: f64,
    pub h: f64,
}

impl OpenLoopSolution {
    pub fn grid(&self) -> &[f64] {
        self.theta.times()
    }

    pub fn theta_at(&self, t: f64) -> Mat {
        self.theta.eval(t)
    }

    /// The feedback as a gain pair with no mean term (`Θ̂ = Θ`).
    pub fn gain(&self) -> Result<PiecewiseGain> {
        let th = MatrixFn::samples(self.theta.times().to_vec(), self.theta.values().to_vec());
        PiecewiseGain::new(TimeGrid::uniform(*self.grid().last().unwrap(), 1)?, vec![th.clone()], vec![th])
    }
}

fn has_mean_field_dynamics(p: &ProblemData) -> bool {
    !(p.a_bar.is_zero() && p.b_bar.is_zero() && p.c_bar.is_zero() && p.d_bar.is_zero())
}

fn smallest_singular(m: &Mat) -> f64 {
    m.clone().svd(false, false).singular_values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Solve the coupled system for `P(s, t)` and `P̂(s, t)` on `0 ≤ t ≤ s ≤ T`
/// with step `h`. The slices are not symmetrized.
pub fn solve_open_loop(problem: &ProblemData, h: f64) -> Result<OpenLoopSolution> {
    problem.check_shapes()?;
    if has_mean_field_dynamics(problem) {
        return Err(MflqError::Precondition(
            "open-loop equilibria are only defined here for dynamics without mean-field terms (Ā = B̄ = C̄ = D̄ = 0)"
                .into(),
        ));
    }
    let p = problem;
    let hc = hat(p);
    let grid = snapped_grid(0.0, p.horizon, h, &[])?;
    let stride = (grid.len() - 1).div_ceil(MAX_KEPT).max(1);

    let terminal = |t: f64| vec![p.g.eval(t), hc.g.eval(t)];
    let factor = |s: f64, x: &[Mat]| -> Result<Mat> {
        let (pp, ph) = (&x[0], &x[1]);
        let (b, c, d) = (p.b.eval(s), p.c.eval(s), p.d.eval(s));
        let dt = d.transpose();
        let lhs = hc.r.eval(s, s) + &dt * pp * &d;
        let rhs = b.transpose() * ph + &dt * pp * &c;
        let sv = smallest_singular(&lhs);
        if !(sv > 1e-12 * (1.0 + norm_inf(&lhs))) {
            return Err(MflqError::IllPosed {
                what: "R̂(t,t)+DᵀP(t,t)D".into(),
                at: s,
                min_eig: sv,
            });
        }
        lhs.lu().solve(&rhs).ok_or_else(|| MflqError::IllPosed {
            what: "R̂(t,t)+DᵀP(t,t)D".into(),
            at: s,
            min_eig: sv,
        })
    };
    let rhs = |s: f64, t: f64, f: &Mat, x: &[Mat]| -> Vec<Mat> {
        let (pp, ph) = (&x[0], &x[1]);
        let (a, b, c, d) = (p.a.eval(s), p.b.eval(s), p.c.eval(s), p.d.eval(s));
        let at = a.transpose();
        let ct = c.transpose();
        let sandwich = &ct * pp * &c;
        let cross = &ct * pp * &d;
        let dp = -(pp * &a + &at * pp + &sandwich + p.q.eval(s, t) - (pp * &b + &cross) * f);
        let dph = -(ph * &a + &at * ph + &sandwich + hc.q.eval(s, t) - (ph * &b + &cross) * f);
        vec![dp, dph]
    };
    let field = march_diagonal(&DiagonalMarch {
        grid: &grid,
        symmetric: false,
        terminal: &terminal,
        factor: &factor,
        rhs: &rhs,
        stride,
    })?;

    let split = |c: usize| -> Result<TwoParamMatrixField> {
        let slices = field.slices.iter().map(|sl| sl[c].clone()).collect();
        TwoParamMatrixField::new(grid.clone(), field.kept.clone(), slices)
    };
    let pf = split(0)?;
    let phf = split(1)?;
    let max_asymmetry = pf.max_asymmetry().max(phf.max_asymmetry());
    let diag = |c: usize| MatrixPath::new(grid.clone(), field.diagonal.iter().map(|d| d[c].clone()).collect(), None);
    Ok(OpenLoopSolution {
        p_diag: diag(0),
        p_hat_diag: diag(1),
        theta: MatrixPath::new(grid.clone(), field.factors.clone(), None),
        p: pf,
        p_hat: phf,
        max_asymmetry,
        h,
    })
}
