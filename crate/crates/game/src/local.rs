use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use mflq_sim::{cost_difference, cost_samples, simulate_policy, AffinePolicy, AffineSegment, InitialState, MCConfig};
use mflq_types::linalg::Mat;
use mflq_types::{MatrixFn, MflqError, ProblemData, Result};

use crate::build::DeltaEquilibrium;

/// Paths used to estimate the state law at `t_k` before the check.
const LAW_PATHS: usize = 4096;

#[derive(Debug, Clone, Serialize)]
pub struct LocalProbeRow {
    pub probe: String,
    pub equilibrium_cost: f64,
    pub probe_cost: f64,
    /// Mean of `J(probe) − J(equilibrium)` under common random numbers.
    pub difference: f64,
    pub stderr: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalCheckReport {
    pub k: usize,
    pub rows: Vec<LocalProbeRow>,
    pub passes: bool,
}

fn scaled(a: f64, f: &MatrixFn) -> MatrixFn {
    MatrixFn::Scaled(a, Box::new(f.clone()))
}

/// Ten controls for player `k`'s interval: the equilibrium itself, zero,
/// two constants, scaled and mean-free versions of the equilibrium gains,
/// and randomized perturbations drawn from `seed`.
pub fn default_probes(eq: &DeltaEquilibrium, k: usize, seed: u64) -> Vec<(String, AffineSegment)> {
    let (m, n) = eq.gains.shape();
    let th = eq.gains.theta_fn(k).clone();
    let th_hat = eq.gains.theta_hat_fn(k).clone();
    let l = th.plus(&scaled(-1.0, &th_hat));
    let zero = |r, c| MatrixFn::zeros(r, c);
    let konst = |x: f64| MatrixFn::constant(Mat::from_element(m, 1, x));
    let seg = |k: MatrixFn, l: MatrixFn, v: MatrixFn| AffineSegment { k, l, v };
    let mut out = vec![
        ("equilibrium".to_string(), seg(th.clone(), l.clone(), zero(m, 1))),
        ("zero".into(), seg(zero(m, n), zero(m, n), zero(m, 1))),
        ("constant+".into(), seg(zero(m, n), zero(m, n), konst(0.5))),
        ("constant-".into(), seg(zero(m, n), zero(m, n), konst(-0.5))),
        ("half-gain".into(), seg(scaled(0.5, &th), scaled(0.5, &l), zero(m, 1))),
        ("gain-x1.5".into(), seg(scaled(1.5, &th), scaled(1.5, &l), zero(m, 1))),
        ("no-mean-term".into(), seg(th.clone(), zero(m, n), zero(m, 1))),
        ("mean-only".into(), seg(zero(m, n), scaled(-1.0, &th_hat), zero(m, 1))),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64) << 32);
    for r in 0..2 {
        let mut draw = |rows, cols, amp: f64| {
            MatrixFn::constant(Mat::from_fn(rows, cols, |_, _| amp * rng.random_range(-1.0..1.0)))
        };
        let dk = draw(m, n, 0.5);
        let dl = draw(m, n, 0.5);
        let dv = draw(m, 1, 0.3);
        out.push((format!("random-{r}"), seg(th.plus(&dk), l.plus(&dl), dv)));
    }
    out
}

fn law_at(problem: &ProblemData, eq: &DeltaEquilibrium, k: usize, x0: &[f64], mc: &MCConfig) -> Result<InitialState> {
    if k == 0 {
        return Ok(InitialState::fixed(x0));
    }
    let nn = eq.players();
    let steps = mc.steps.div_ceil(nn) * nn;
    let cfg = MCConfig {
        paths: LAW_PATHS,
        steps,
        seed: mc.seed ^ 0x5eed,
        antithetic: false,
    };
    let policy = AffinePolicy::from_gains(&eq.gains);
    let ens = simulate_policy(problem, &policy, None, 0.0, InitialState::fixed(x0), &cfg, true)?;
    let idx = steps / nn * k;
    let n = problem.n;
    let mut mean = nalgebra::DVector::zeros(n);
    let mut second = Mat::zeros(n, n);
    for path in 0..cfg.paths {
        let x = nalgebra::DVector::from_column_slice(ens.state(path, idx).unwrap_or(&[]));
        second += &x * x.transpose();
        mean += x;
    }
    let np = cfg.paths as f64;
    mean /= np;
    let cov = (second - &mean * mean.transpose() * np) / (np - 1.0);
    let cov = (&cov + cov.transpose()) * 0.5 + Mat::identity(n, n) * 1e-12;
    Ok(match cov.clone().cholesky() {
        Some(ch) => InitialState::Gaussian { mean, chol: ch.l() },
        None => InitialState::Fixed(mean),
    })
}

/// Player `k` replaces the equilibrium on `[t_k, t_{k+1})` by each probe
/// while later players keep the equilibrium feedback; both costs use player
/// k's weights. The state at `t_k` is drawn from a Gaussian matched to the
/// simulated equilibrium law started from `x0` at time 0.
pub fn delta_local_optimality_check(
    problem: &ProblemData,
    eq: &DeltaEquilibrium,
    k: usize,
    x0: &[f64],
    probes: &[(String, AffineSegment)],
    mc: &MCConfig,
) -> Result<LocalCheckReport> {
    mc.check()?;
    let nn = eq.players();
    if k >= nn {
        return Err(MflqError::Config(format!("player {k} does not exist (N = {nn})")));
    }
    if x0.len() != problem.n {
        return Err(MflqError::dim("x0", (problem.n, 1), (x0.len(), 1)));
    }
    let start = law_at(problem, eq, k, x0, mc)?;
    let tk = eq.partition.nodes()[k];
    let left = nn - k;
    let steps = (mc.steps * left).div_ceil(nn).div_ceil(left) * left;
    let cfg = MCConfig { steps, ..*mc };
    let base = AffinePolicy::from_gains(&eq.gains);
    let run = |policy: &AffinePolicy| -> Result<Vec<f64>> {
        let ens = simulate_policy(problem, policy, None, tk, start.clone(), &cfg, false)?;
        cost_samples(problem, &ens, tk)
    };
    let eq_cost = run(&base)?;
    let eq_mean = eq_cost.iter().sum::<f64>() / eq_cost.len() as f64;
    let mut rows = Vec::new();
    for (name, seg) in probes {
        let segments = (0..nn).map(|j| if j == k { seg.clone() } else { base.segment(j).clone() }).collect();
        let policy = AffinePolicy::new(eq.partition.clone(), segments)?;
        let c = run(&policy)?;
        let (difference, stderr) = cost_difference(&c, &eq_cost)?;
        rows.push(LocalProbeRow {
            probe: name.clone(),
            equilibrium_cost: eq_mean,
            probe_cost: c.iter().sum::<f64>() / c.len() as f64,
            difference,
            stderr,
            ok: difference >= -3.0 * stderr - 1e-12 * (1.0 + eq_mean.abs()),
        });
    }
    Ok(LocalCheckReport {
        k,
        passes: rows.iter().all(|r| r.ok),
        rows,
    })
}
