use mflq_types::linalg::Mat;
use mflq_types::{MatrixFn, MflqError, PiecewiseGain, ProblemData, Result, TimeGrid};

use crate::config::{InitialState, MCConfig};
use crate::engine::{mean_stderr, simulate_system, CostWeights, LinearSystem, PathEnsemble, QuadraticCost, StepCoeffs};

/// One interval of an affine policy `u = −K X + L E_ρ[X] + v`.
#[derive(Debug, Clone)]
pub struct AffineSegment {
    pub k: MatrixFn,
    pub l: MatrixFn,
    pub v: MatrixFn,
}

/// Piecewise affine feedback. The conditional mean is frozen at the
/// partition nodes (and at the simulation start).
#[derive(Debug, Clone)]
pub struct AffinePolicy {
    partition: TimeGrid,
    segments: Vec<AffineSegment>,
}

impl AffinePolicy {
    pub fn new(partition: TimeGrid, segments: Vec<AffineSegment>) -> Result<Self> {
        if segments.len() != partition.intervals() {
            return Err(MflqError::Config(format!(
                "policy needs {} segments, got {}",
                partition.intervals(),
                segments.len()
            )));
        }
        Ok(AffinePolicy { partition, segments })
    }

    /// `u = −Θ X + (Θ − Θ̂) E_ρ[X]`.
    pub fn from_gains(g: &PiecewiseGain) -> Self {
        let (m, _) = g.shape();
        let segments = (0..g.partition().intervals())
            .map(|k| {
                let th = g.theta_fn(k).clone();
                let th_hat = g.theta_hat_fn(k).clone();
                AffineSegment {
                    l: th.plus(&MatrixFn::Scaled(-1.0, Box::new(th_hat))),
                    k: th,
                    v: MatrixFn::zeros(m, 1),
                }
            })
            .collect();
        AffinePolicy {
            partition: g.partition().clone(),
            segments,
        }
    }

    /// A single segment on `[0, T]`: the mean is frozen only at the start.
    pub fn single(horizon: f64, k: MatrixFn, l: MatrixFn, v: MatrixFn) -> Result<Self> {
        AffinePolicy::new(TimeGrid::uniform(horizon, 1)?, vec![AffineSegment { k, l, v }])
    }

    pub fn partition(&self) -> &TimeGrid {
        &self.partition
    }

    pub fn segment(&self, k: usize) -> &AffineSegment {
        &self.segments[k]
    }
}

/// Deterministic inhomogeneous drift `b(s)` and diffusion `σ(s)` (n×1).
#[derive(Debug, Clone)]
pub struct Forcing {
    pub b: MatrixFn,
    pub sigma: MatrixFn,
}

/// A problem's dynamics under a policy, ready to compile.
#[derive(Debug, Clone)]
pub struct ProblemSystem<'a> {
    pub problem: &'a ProblemData,
    pub policy: &'a AffinePolicy,
    pub forcing: Option<&'a Forcing>,
}

impl ProblemSystem<'_> {
    /// Coefficients on interval `k` at `s`.
    pub fn coeffs(&self, k: usize, s: f64) -> StepCoeffs {
        let p = self.problem;
        let seg = self.policy.segment(k);
        let (kk, l, v) = (seg.k.eval(s), seg.l.eval(s), seg.v.eval(s));
        let (a, ab, b, bb) = (p.a.eval(s), p.a_bar.eval(s), p.b.eval(s), p.b_bar.eval(s));
        let (c, cb, d, db) = (p.c.eval(s), p.c_bar.eval(s), p.d.eval(s), p.d_bar.eval(s));
        let lk = &l - &kk;
        let mut f0 = (&b + &bb) * &v;
        let mut g0 = (&d + &db) * &v;
        if let Some(f) = self.forcing {
            f0 += f.b.eval(s);
            g0 += f.sigma.eval(s);
        }
        StepCoeffs {
            fx: &a - &b * &kk,
            fm: ab + &b * &l + &bb * &lk,
            f0,
            gx: &c - &d * &kk,
            gm: cb + &d * &l + &db * &lk,
            g0,
            ux: -kk,
            um: l,
            u0: v,
        }
    }

    /// Compile on a uniform grid of `steps` steps over `[t, T]`; every
    /// partition node inside `(t, T)` must be a grid node.
    pub fn compile(&self, t: f64, x0: InitialState, steps: usize) -> Result<LinearSystem> {
        let p = self.problem;
        p.check_shapes()?;
        let horizon = p.horizon;
        if (self.policy.partition.horizon() - horizon).abs() > 1e-12 * horizon.max(1.0) {
            return Err(MflqError::Config("policy horizon differs from the problem horizon".into()));
        }
        if !(0.0..horizon).contains(&t) {
            return Err(MflqError::Config(format!("start time {t} outside [0, T)")));
        }
        let h = (horizon - t) / steps as f64;
        let mut times: Vec<f64> = (0..=steps).map(|i| t + i as f64 * h).collect();
        times[steps] = horizon;
        let mut reanchor = vec![false; steps];
        for &node in self.policy.partition.nodes() {
            if node <= t + 1e-12 || node >= horizon - 1e-12 {
                continue;
            }
            let idx = ((node - t) / h).round() as usize;
            if idx == 0 || idx >= steps || (times[idx] - node).abs() > 1e-9 * horizon.max(1.0) {
                return Err(MflqError::Config(format!(
                    "{steps} steps on [{t}, {horizon}] do not align with the gain jump at {node}"
                )));
            }
            times[idx] = node;
            reanchor[idx - 1] = true;
        }
        let interval: Vec<usize> = (0..steps).map(|i| self.policy.partition.interval_of(times[i])).collect();
        LinearSystem::new(p.n, p.m, times, reanchor, x0, |i, s| self.coeffs(interval[i], s))
    }
}

/// The cost `J(t, ·)` of a problem as simulation weights on `times`.
pub fn problem_cost(p: &ProblemData, t: f64, times: &[f64]) -> QuadraticCost {
    let (n, m) = (p.n, p.m);
    QuadraticCost::new(
        times,
        |s| CostWeights {
            q: p.q.eval(s, t),
            qs: p.q_bar.eval(s, t),
            qp: Mat::zeros(n, n),
            r: p.r.eval(s, t),
            rs: p.r_bar.eval(s, t),
            rp: Mat::zeros(m, m),
        },
        p.g.eval(t),
        p.g_bar.eval(t),
        Mat::zeros(n, n),
    )
}

/// Simulate the problem's state under an affine policy from `(t, x0)`.
pub fn simulate_policy(
    problem: &ProblemData,
    policy: &AffinePolicy,
    forcing: Option<&Forcing>,
    t: f64,
    x0: InitialState,
    mc: &MCConfig,
    record: bool,
) -> Result<PathEnsemble> {
    mc.check()?;
    let sys = ProblemSystem {
        problem,
        policy,
        forcing,
    }
    .compile(t, x0, mc.steps)?;
    simulate_system(sys, mc, None, record)
}

/// Closed-loop simulation under a feedback pair `(Θ, Θ̂)`.
pub fn simulate_closed_loop(
    problem: &ProblemData,
    gains: &PiecewiseGain,
    t: f64,
    x0: InitialState,
    mc: &MCConfig,
) -> Result<PathEnsemble> {
    simulate_policy(problem, &AffinePolicy::from_gains(gains), None, t, x0, mc, false)
}

/// Per-unit costs `J(t, x; u)` of the ensemble's paths, regenerated with
/// the same random numbers.
pub fn cost_samples(problem: &ProblemData, ens: &PathEnsemble, t: f64) -> Result<Vec<f64>> {
    let t0 = ens.times()[0];
    if (t0 - t).abs() > 1e-12 {
        return Err(MflqError::Precondition(format!("ensemble starts at {t0}, not at {t}")));
    }
    ens.replay_cost(&problem_cost(problem, t, ens.times()))
}

/// Monte Carlo estimate of `J(t, x; u)` with its standard error.
pub fn estimate_cost(problem: &ProblemData, ens: &PathEnsemble, t: f64) -> Result<(f64, f64)> {
    Ok(mean_stderr(&cost_samples(problem, ens, t)?))
}

/// Uncontrolled `dX = (𝒜X + 𝒜̄E_tX)ds + (𝒞X + 𝒞̄E_tX)dW` from a possibly
/// random `x0`, priced with running weights on `X`, `E_t X` (per path) and
/// `E X` (population), and terminal weights on `X(T)` and `E X(T)`.
/// Returns the per-unit cost samples.
#[allow(clippy::too_many_arguments)]
pub fn layered_cost_samples(
    generator: [&MatrixFn; 4],
    running: [&MatrixFn; 3],
    g: &Mat,
    g_bar: &Mat,
    t: f64,
    horizon: f64,
    x0: InitialState,
    mc: &MCConfig,
) -> Result<Vec<f64>> {
    mc.check()?;
    let n = x0.dim();
    let [a, a_bar, c, c_bar] = generator;
    let times: Vec<f64> = (0..=mc.steps).map(|i| t + (horizon - t) * i as f64 / mc.steps as f64).collect();
    let sys = LinearSystem::new(n, 1, times.clone(), vec![false; mc.steps], x0, |_, s| StepCoeffs {
        fx: a.eval(s),
        fm: a_bar.eval(s),
        gx: c.eval(s),
        gm: c_bar.eval(s),
        ..StepCoeffs::zeros(n, 1)
    })?;
    let [q, q_tilde, q_bar] = running;
    let cost = QuadraticCost::new(
        &times,
        |s| CostWeights {
            q: q.eval(s),
            qs: q_tilde.eval(s),
            qp: q_bar.eval(s),
            r: Mat::zeros(1, 1),
            rs: Mat::zeros(1, 1),
            rp: Mat::zeros(1, 1),
        },
        g.clone(),
        Mat::zeros(n, n),
        g_bar.clone(),
    );
    let ens = simulate_system(sys, mc, Some(&cost), false)?;
    Ok(ens.unit_costs().unwrap_or_default().to_vec())
}
