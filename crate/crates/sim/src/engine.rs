use std::io::Write;
use std::sync::Arc;

use mflq_types::linalg::{eye, Mat};
use mflq_types::{MflqError, Result};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::{InitialState, MCConfig};

/// Coefficients of a linear mean-field system at one time, with `m` the
/// frozen conditional mean used by the dynamics:
///
/// drift `Fx z + Fm m + f0`, diffusion `Gx z + Gm m + g0`,
/// control `ux z + um m + u0`.
#[derive(Debug, Clone)]
pub struct StepCoeffs {
    pub fx: Mat,
    pub fm: Mat,
    pub f0: Mat,
    pub gx: Mat,
    pub gm: Mat,
    pub g0: Mat,
    pub ux: Mat,
    pub um: Mat,
    pub u0: Mat,
}

impl StepCoeffs {
    /// Uncontrolled system with `m_dim` control components all zero.
    pub fn zeros(n: usize, m_dim: usize) -> Self {
        StepCoeffs {
            fx: Mat::zeros(n, n),
            fm: Mat::zeros(n, n),
            f0: Mat::zeros(n, 1),
            gx: Mat::zeros(n, n),
            gm: Mat::zeros(n, n),
            g0: Mat::zeros(n, 1),
            ux: Mat::zeros(m_dim, n),
            um: Mat::zeros(m_dim, n),
            u0: Mat::zeros(m_dim, 1),
        }
    }

    fn check(&self, n: usize, m_dim: usize) -> Result<()> {
        let want = [
            ("Fx", &self.fx, (n, n)),
            ("Fm", &self.fm, (n, n)),
            ("f0", &self.f0, (n, 1)),
            ("Gx", &self.gx, (n, n)),
            ("Gm", &self.gm, (n, n)),
            ("g0", &self.g0, (n, 1)),
            ("ux", &self.ux, (m_dim, n)),
            ("um", &self.um, (m_dim, n)),
            ("u0", &self.u0, (m_dim, 1)),
        ];
        for (name, m, shape) in want {
            if m.shape() != shape {
                return Err(MflqError::dim(name, shape, m.shape()));
            }
        }
        Ok(())
    }

    /// `[[Fx+Fm, f0], [0, 0]]`, the generator of the mean ODE.
    fn mean_generator(&self) -> Mat {
        let n = self.fx.nrows();
        let mut g = Mat::zeros(n + 1, n + 1);
        g.view_mut((0, 0), (n, n)).copy_from(&(&self.fx + &self.fm));
        g.view_mut((0, n), (n, 1)).copy_from(&self.f0);
        g
    }
}

fn flat(m: &Mat) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// `out += a x` for a row-major `a`.
#[inline]
fn mv_add(out: &mut [f64], a: &[f64], x: &[f64]) {
    let c = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &a[i * c..(i + 1) * c];
        let mut acc = 0.0;
        for j in 0..c {
            acc += row[j] * x[j];
        }
        *o += acc;
    }
}

#[inline]
fn qform(a: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut r = 0.0;
        for j in 0..n {
            r += a[i * n + j] * x[j];
        }
        acc += x[i] * r;
    }
    acc
}

#[derive(Debug, Clone)]
struct Control {
    ux: Vec<f64>,
    um: Vec<f64>,
    u0: Vec<f64>,
    // ux + um, for means of the control
    us: Vec<f64>,
}

impl Control {
    fn new(c: &StepCoeffs) -> Self {
        Control {
            ux: flat(&c.ux),
            um: flat(&c.um),
            u0: flat(&c.u0),
            us: flat(&(&c.ux + &c.um)),
        }
    }

    fn apply(&self, z: &[f64], m: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.u0);
        mv_add(out, &self.ux, z);
        mv_add(out, &self.um, m);
    }

    fn of_mean(&self, mean: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.u0);
        mv_add(out, &self.us, mean);
    }
}

#[derive(Debug, Clone)]
struct Compiled {
    h: f64,
    sqrt_h: f64,
    fx: Vec<f64>,
    fm: Vec<f64>,
    f0: Vec<f64>,
    gx: Vec<f64>,
    gm: Vec<f64>,
    g0: Vec<f64>,
    left: Control,
    right: Control,
    phi: Vec<f64>,
    psi: Vec<f64>,
    reanchor: bool,
}

/// A linear mean-field SDE on a fixed time grid, compiled for simulation.
///
/// The frozen mean `m` is reset to the path value at every node flagged in
/// `reanchor` (and at the start); between resets it follows the mean ODE,
/// advanced with the RK4 transition of each step.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    n: usize,
    m_dim: usize,
    times: Vec<f64>,
    steps: Vec<Compiled>,
    x0: InitialState,
}

impl LinearSystem {
    /// `coeff(i, s)` gives the coefficients used on step `i` evaluated at
    /// `s ∈ [times[i], times[i+1]]`; piecewise data should return left limits
    /// at the right end. `reanchor[i]` flags node `i + 1`.
    pub fn new(
        n: usize,
        m_dim: usize,
        times: Vec<f64>,
        reanchor: Vec<bool>,
        x0: InitialState,
        coeff: impl Fn(usize, f64) -> StepCoeffs,
    ) -> Result<Self> {
        if times.len() < 2 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MflqError::Config("simulation grid must be strictly increasing with ≥ 2 nodes".into()));
        }
        if reanchor.len() != times.len() - 1 {
            return Err(MflqError::Config("one re-anchor flag per step required".into()));
        }
        if x0.dim() != n {
            return Err(MflqError::dim("x0", (n, 1), (x0.dim(), 1)));
        }
        if let InitialState::Gaussian { chol, .. } = &x0 {
            if chol.shape() != (n, n) {
                return Err(MflqError::dim("x0 covariance factor", (n, n), chol.shape()));
            }
        }
        let mut steps = Vec::with_capacity(times.len() - 1);
        for i in 0..times.len() - 1 {
            let (a, b) = (times[i], times[i + 1]);
            let h = b - a;
            let ca = coeff(i, a);
            let cm = coeff(i, a + 0.5 * h);
            let cb = coeff(i, b);
            for c in [&ca, &cm, &cb] {
                c.check(n, m_dim)?;
            }
            // RK4 transition of the augmented mean ODE y' = G y.
            let (ga, gm, gb) = (ca.mean_generator(), cm.mean_generator(), cb.mean_generator());
            let id = eye(n + 1);
            let k1 = &ga;
            let k2 = &gm * (&id + k1 * (0.5 * h));
            let k3 = &gm * (&id + &k2 * (0.5 * h));
            let k4 = &gb * (&id + &k3 * h);
            let t = &id + (k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) * (h / 6.0);
            let phi = t.view((0, 0), (n, n)).into_owned();
            let psi = t.view((0, n), (n, 1)).into_owned();
            steps.push(Compiled {
                h,
                sqrt_h: h.sqrt(),
                fx: flat(&ca.fx),
                fm: flat(&ca.fm),
                f0: flat(&ca.f0),
                gx: flat(&ca.gx),
                gm: flat(&ca.gm),
                g0: flat(&ca.g0),
                left: Control::new(&ca),
                right: Control::new(&cb),
                phi: flat(&phi),
                psi: flat(&psi),
                reanchor: reanchor[i],
            });
        }
        Ok(LinearSystem {
            n,
            m_dim,
            times,
            steps,
            x0,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn control_dim(&self) -> usize {
        self.m_dim
    }

    pub fn initial(&self) -> &InitialState {
        &self.x0
    }

    /// Population mean at every node, from the mean ODE.
    pub fn mean_path(&self) -> Vec<DVector<f64>> {
        let mut mu = self.x0.mean().as_slice().to_vec();
        let mut out = vec![DVector::from_column_slice(&mu)];
        for st in &self.steps {
            let mut next = st.psi.clone();
            mv_add(&mut next, &st.phi, &mu);
            mu = next;
            out.push(DVector::from_column_slice(&mu));
        }
        out
    }
}

/// Weights of a quadratic cost on the simulation grid. `q` acts on the
/// state, `qs` on the mean conditioned at the start time (per path), `qp` on
/// the population mean; the `r` family acts on the control and its
/// corresponding means, the `g` family at the final node.
#[derive(Debug, Clone)]
pub struct QuadraticCost {
    q: Vec<Vec<f64>>,
    qs: Vec<Vec<f64>>,
    qp: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    rs: Vec<Vec<f64>>,
    rp: Vec<Vec<f64>>,
    g: [Vec<f64>; 3],
}

/// Running weights at one time.
#[derive(Debug, Clone)]
pub struct CostWeights {
    pub q: Mat,
    pub qs: Mat,
    pub qp: Mat,
    pub r: Mat,
    pub rs: Mat,
    pub rp: Mat,
}

impl QuadraticCost {
    pub fn new(times: &[f64], running: impl Fn(f64) -> CostWeights, g: Mat, gs: Mat, gp: Mat) -> Self {
        let mut c = QuadraticCost {
            q: vec![],
            qs: vec![],
            qp: vec![],
            r: vec![],
            rs: vec![],
            rp: vec![],
            g: [flat(&g), flat(&gs), flat(&gp)],
        };
        for &s in times {
            let w = running(s);
            c.q.push(flat(&w.q));
            c.qs.push(flat(&w.qs));
            c.qp.push(flat(&w.qp));
            c.r.push(flat(&w.r));
            c.rs.push(flat(&w.rs));
            c.rp.push(flat(&w.rp));
        }
        c
    }

    fn check(&self, sys: &LinearSystem) -> Result<()> {
        let (n, m) = (sys.n, sys.m_dim);
        if self.q.len() != sys.times.len() {
            return Err(MflqError::Config("cost weights must cover every simulation node".into()));
        }
        let ok_n = |v: &Vec<f64>| v.len() == n * n;
        let ok_m = |v: &Vec<f64>| v.len() == m * m;
        let good = self.q.iter().chain(&self.qs).chain(&self.qp).all(ok_n)
            && self.r.iter().chain(&self.rs).chain(&self.rp).all(ok_m)
            && self.g.iter().all(ok_n);
        if !good {
            return Err(MflqError::Config("cost weight shapes do not match the system".into()));
        }
        Ok(())
    }
}

/// One row of the ensemble summary export.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub step: usize,
    pub time: f64,
    pub empirical_mean: Vec<f64>,
    pub cond_mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Result of a Monte Carlo run. Brownian increments are not stored: they
/// are regenerated from `(seed, unit index)`, which gives common random
/// numbers across runs with the same configuration.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    system: Arc<LinearSystem>,
    config: MCConfig,
    cond_mean: Vec<DVector<f64>>,
    emp_mean: Vec<DVector<f64>>,
    path_std: Vec<DVector<f64>>,
    mean_stderr: Vec<DVector<f64>>,
    terminal: Vec<f64>,
    costs: Option<Vec<f64>>,
    states: Option<Vec<f64>>,
    controls: Option<Vec<f64>>,
}

struct ChunkOut {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    unit_sumsq: Vec<f64>,
    terminal: Vec<f64>,
    costs: Vec<f64>,
    states: Vec<f64>,
    controls: Vec<f64>,
}

const UNITS_PER_CHUNK: usize = 256;

struct Scratch {
    z: Vec<f64>,
    m: Vec<f64>,
    ms: Vec<f64>,
    drift: Vec<f64>,
    diff: Vec<f64>,
    u: Vec<f64>,
    tmp: Vec<f64>,
    tmp_u: Vec<f64>,
}

fn running_cost(
    cost: &QuadraticCost,
    node: usize,
    ctl: &Control,
    s: &mut Scratch,
) -> f64 {
    ctl.apply(&s.z, &s.m, &mut s.u);
    let mut v = qform(&cost.q[node], &s.z) + qform(&cost.qs[node], &s.ms) + qform(&cost.r[node], &s.u);
    ctl.of_mean(&s.ms, &mut s.tmp_u);
    v += qform(&cost.rs[node], &s.tmp_u);
    v
}

/// Deterministic part of the cost (population-mean terms), per node.
fn population_terms(sys: &LinearSystem, cost: &QuadraticCost, mu: &[DVector<f64>]) -> (Vec<f64>, Vec<f64>, f64) {
    let mut left = vec![0.0; sys.steps.len()];
    let mut right = vec![0.0; sys.steps.len()];
    let mut u = vec![0.0; sys.m_dim];
    for (i, st) in sys.steps.iter().enumerate() {
        let a = mu[i].as_slice();
        st.left.of_mean(a, &mut u);
        left[i] = qform(&cost.qp[i], a) + qform(&cost.rp[i], &u);
        let b = mu[i + 1].as_slice();
        st.right.of_mean(b, &mut u);
        right[i] = qform(&cost.qp[i + 1], b) + qform(&cost.rp[i + 1], &u);
    }
    let term = qform(&cost.g[2], mu.last().unwrap().as_slice());
    (left, right, term)
}

fn run_chunk(
    sys: &LinearSystem,
    mc: &MCConfig,
    cost: Option<(&QuadraticCost, &(Vec<f64>, Vec<f64>, f64))>,
    record: bool,
    units: std::ops::Range<usize>,
) -> ChunkOut {
    let n = sys.n;
    let nodes = sys.times.len();
    let per_unit = if mc.antithetic { 2 } else { 1 };
    let mut out = ChunkOut {
        sum: vec![0.0; nodes * n],
        sumsq: vec![0.0; nodes * n],
        unit_sumsq: vec![0.0; nodes * n],
        terminal: Vec::with_capacity(units.len() * per_unit * n),
        costs: Vec::with_capacity(units.len()),
        states: Vec::new(),
        controls: Vec::new(),
    };
    let mut s = Scratch {
        z: vec![0.0; n],
        m: vec![0.0; n],
        ms: vec![0.0; n],
        drift: vec![0.0; n],
        diff: vec![0.0; n],
        u: vec![0.0; sys.m_dim],
        tmp: vec![0.0; n],
        tmp_u: vec![0.0; sys.m_dim],
    };
    let steps = sys.steps.len();
    let mut noise = vec![0.0; steps];
    let mut xi = vec![0.0; n];
    let mut unit_vals = vec![0.0; nodes * n];
    for unit in units {
        let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
        rng.set_stream(unit as u64);
        if let InitialState::Gaussian { .. } = sys.x0 {
            for v in xi.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        }
        for v in noise.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        unit_vals.iter_mut().for_each(|v| *v = 0.0);
        let mut unit_cost = 0.0;
        for rep in 0..per_unit {
            let sign = if rep == 0 { 1.0 } else { -1.0 };
            match &sys.x0 {
                InitialState::Fixed(x) => s.z.copy_from_slice(x.as_slice()),
                InitialState::Gaussian { mean, chol } => {
                    s.z.copy_from_slice(mean.as_slice());
                    for i in 0..n {
                        for j in 0..n {
                            s.z[i] += sign * chol[(i, j)] * xi[j];
                        }
                    }
                }
            }
            s.m.copy_from_slice(&s.z);
            s.ms.copy_from_slice(&s.z);
            let mut path_cost = 0.0;
            let accumulate = |node: usize, z: &[f64], vals: &mut [f64], out: &mut ChunkOut| {
                for k in 0..n {
                    let v = z[k];
                    out.sum[node * n + k] += v;
                    out.sumsq[node * n + k] += v * v;
                    vals[node * n + k] += v / per_unit as f64;
                }
            };
            accumulate(0, &s.z, &mut unit_vals, &mut out);
            if record {
                out.states.extend_from_slice(&s.z);
            }
            for (i, st) in sys.steps.iter().enumerate() {
                if let Some((c, pop)) = cost {
                    path_cost += 0.5 * st.h * (running_cost(c, i, &st.left, &mut s) + pop.0[i]);
                }
                if record {
                    st.left.apply(&s.z, &s.m, &mut s.u);
                    out.controls.extend_from_slice(&s.u);
                }
                s.drift.copy_from_slice(&st.f0);
                mv_add(&mut s.drift, &st.fx, &s.z);
                mv_add(&mut s.drift, &st.fm, &s.m);
                s.diff.copy_from_slice(&st.g0);
                mv_add(&mut s.diff, &st.gx, &s.z);
                mv_add(&mut s.diff, &st.gm, &s.m);
                let dw = sign * noise[i] * st.sqrt_h;
                for k in 0..n {
                    s.z[k] += s.drift[k] * st.h + s.diff[k] * dw;
                }
                // mean transitions
                s.tmp.copy_from_slice(&st.psi);
                mv_add(&mut s.tmp, &st.phi, &s.m);
                s.m.copy_from_slice(&s.tmp);
                s.tmp.copy_from_slice(&st.psi);
                mv_add(&mut s.tmp, &st.phi, &s.ms);
                s.ms.copy_from_slice(&s.tmp);
                if let Some((c, pop)) = cost {
                    path_cost += 0.5 * st.h * (running_cost(c, i + 1, &st.right, &mut s) + pop.1[i]);
                }
                if st.reanchor {
                    s.m.copy_from_slice(&s.z);
                }
                accumulate(i + 1, &s.z, &mut unit_vals, &mut out);
                if record {
                    out.states.extend_from_slice(&s.z);
                }
            }
            if let Some((c, pop)) = cost {
                path_cost += qform(&c.g[0], &s.z) + qform(&c.g[1], &s.ms) + pop.2;
                unit_cost += path_cost / per_unit as f64;
            }
            out.terminal.extend_from_slice(&s.z);
        }
        for (acc, v) in out.unit_sumsq.iter_mut().zip(&unit_vals) {
            *acc += v * v;
        }
        if cost.is_some() {
            out.costs.push(unit_cost);
        }
    }
    out
}

/// Run the system. With `cost`, per-unit costs are returned as well (a unit
/// is one path, or an antithetic pair averaged).
pub fn simulate_system(
    system: LinearSystem,
    mc: &MCConfig,
    cost: Option<&QuadraticCost>,
    record: bool,
) -> Result<PathEnsemble> {
    mc.check()?;
    let system = Arc::new(system);
    run(system, mc, cost, record)
}

fn run(system: Arc<LinearSystem>, mc: &MCConfig, cost: Option<&QuadraticCost>, record: bool) -> Result<PathEnsemble> {
    if let Some(c) = cost {
        c.check(&system)?;
    }
    let sys = &*system;
    let cond_mean = sys.mean_path();
    let pop = cost.map(|c| population_terms(sys, c, &cond_mean));
    let units = if mc.antithetic { mc.paths / 2 } else { mc.paths };
    let chunks: Vec<_> = (0..units.div_ceil(UNITS_PER_CHUNK))
        .map(|c| c * UNITS_PER_CHUNK..((c + 1) * UNITS_PER_CHUNK).min(units))
        .collect();
    let cost_ref = cost.zip(pop.as_ref());
    let outs: Vec<ChunkOut> = chunks
        .into_par_iter()
        .map(|r| run_chunk(sys, mc, cost_ref, record, r))
        .collect();

    let n = sys.n;
    let nodes = sys.times.len();
    let mut sum = vec![0.0; nodes * n];
    let mut sumsq = vec![0.0; nodes * n];
    let mut unit_sumsq = vec![0.0; nodes * n];
    let mut terminal = Vec::with_capacity(mc.paths * n);
    let mut costs = Vec::with_capacity(units);
    let mut states = Vec::new();
    let mut controls = Vec::new();
    for o in outs {
        for k in 0..nodes * n {
            sum[k] += o.sum[k];
            sumsq[k] += o.sumsq[k];
            unit_sumsq[k] += o.unit_sumsq[k];
        }
        terminal.extend(o.terminal);
        costs.extend(o.costs);
        states.extend(o.states);
        controls.extend(o.controls);
    }
    if terminal.iter().any(|v| !v.is_finite()) {
        return Err(MflqError::BlowUp { time: *sys.times.last().unwrap() });
    }
    let p = mc.paths as f64;
    let u = units as f64;
    let mut emp_mean = Vec::with_capacity(nodes);
    let mut path_std = Vec::with_capacity(nodes);
    let mut mean_stderr = Vec::with_capacity(nodes);
    for node in 0..nodes {
        let r = node * n..(node + 1) * n;
        let mean: Vec<f64> = sum[r.clone()].iter().map(|s| s / p).collect();
        let std: Vec<f64> = sumsq[r.clone()]
            .iter()
            .zip(&mean)
            .map(|(q, m)| ((q - p * m * m) / (p - 1.0)).max(0.0).sqrt())
            .collect();
        let se: Vec<f64> = unit_sumsq[r]
            .iter()
            .zip(&mean)
            .map(|(q, m)| ((q - u * m * m) / (u - 1.0)).max(0.0).sqrt() / u.sqrt())
            .collect();
        emp_mean.push(DVector::from_vec(mean));
        path_std.push(DVector::from_vec(std));
        mean_stderr.push(DVector::from_vec(se));
    }
    Ok(PathEnsemble {
        system: system.clone(),
        config: *mc,
        cond_mean,
        emp_mean,
        path_std,
        mean_stderr,
        terminal,
        costs: cost.map(|_| costs),
        states: record.then_some(states),
        controls: record.then_some(controls),
    })
}

/// Sample mean and standard error.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl PathEnsemble {
    pub fn times(&self) -> &[f64] {
        self.system.times()
    }

    pub fn config(&self) -> &MCConfig {
        &self.config
    }

    pub fn system(&self) -> &LinearSystem {
        &self.system
    }

    pub fn dim(&self) -> usize {
        self.system.n
    }

    /// Mean at every node from the mean ODE.
    pub fn cond_mean(&self) -> &[DVector<f64>] {
        &self.cond_mean
    }

    pub fn empirical_mean(&self) -> &[DVector<f64>] {
        &self.emp_mean
    }

    /// Standard error of the empirical mean (pair-based under antithetic sampling).
    pub fn mean_stderr(&self) -> &[DVector<f64>] {
        &self.mean_stderr
    }

    pub fn path_std(&self) -> &[DVector<f64>] {
        &self.path_std
    }

    /// Final state of path `p`.
    pub fn terminal(&self, p: usize) -> &[f64] {
        let n = self.system.n;
        &self.terminal[p * n..(p + 1) * n]
    }

    /// Mean and standard error of `f(X(T))`, pairing antithetic paths.
    pub fn terminal_statistic(&self, f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
        let per = if self.config.antithetic { 2 } else { 1 };
        let units = self.config.paths / per;
        let vals: Vec<f64> = (0..units)
            .map(|u| (0..per).map(|r| f(self.terminal(u * per + r))).sum::<f64>() / per as f64)
            .collect();
        mean_stderr(&vals)
    }

    /// Per-unit costs if a cost was attached to the run.
    pub fn unit_costs(&self) -> Option<&[f64]> {
        self.costs.as_deref()
    }

    /// Recorded state of path `p` at node `i`, if the run recorded paths.
    pub fn state(&self, p: usize, i: usize) -> Option<&[f64]> {
        let n = self.system.n;
        let nodes = self.system.times.len();
        self.states.as_ref().map(|s| &s[(p * nodes + i) * n..(p * nodes + i + 1) * n])
    }

    /// Recorded control of path `p` on step `i` (left end).
    pub fn control(&self, p: usize, i: usize) -> Option<&[f64]> {
        let m = self.system.m_dim;
        let steps = self.system.steps.len();
        self.controls.as_ref().map(|c| &c[(p * steps + i) * m..(p * steps + i + 1) * m])
    }

    /// Regenerate the same paths and price them under `cost`.
    pub fn replay_cost(&self, cost: &QuadraticCost) -> Result<Vec<f64>> {
        let e = run(self.system.clone(), &self.config, Some(cost), false)?;
        Ok(e.costs.unwrap_or_default())
    }

    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        self.times()
            .iter()
            .enumerate()
            .map(|(i, &t)| SummaryRow {
                step: i,
                time: t,
                empirical_mean: self.emp_mean[i].as_slice().to_vec(),
                cond_mean: self.cond_mean[i].as_slice().to_vec(),
                std: self.path_std[i].as_slice().to_vec(),
            })
            .collect()
    }
}

/// Mean and standard error of `a − b` for two equally configured runs;
/// under common random numbers this is far tighter than either estimate.
pub fn cost_difference(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(MflqError::Config("cost samples must be non-empty and of equal length".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(mean_stderr(&d))
}

/// Flat little-endian dump of recorded paths: 16-byte header
/// (`MFLQ`, version u16, n u16, paths u32, nodes u32) then f64 values
/// ordered path, node, component.
pub fn write_paths_binary(ens: &PathEnsemble, mut w: impl Write) -> Result<()> {
    let states = ens
        .states
        .as_ref()
        .ok_or_else(|| MflqError::Config("ensemble was generated without path recording".into()))?;
    let io = |e: std::io::Error| MflqError::Config(format!("write failed: {e}"));
    w.write_all(b"MFLQ").map_err(io)?;
    w.write_all(&1u16.to_le_bytes()).map_err(io)?;
    w.write_all(&(ens.dim() as u16).to_le_bytes()).map_err(io)?;
    w.write_all(&(ens.config.paths as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(ens.times().len() as u32).to_le_bytes()).map_err(io)?;
    for v in states {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    Ok(())
}
