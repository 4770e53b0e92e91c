use std::collections::BTreeMap;
use std::sync::Arc;

use mflq_ode::{solve_lyapunov_on, MatrixPath, Sandwich};
use mflq_precommit::{solve_riccati_pair, PairData, RiccatiPair};
use mflq_types::linalg::{eye, max_eig, min_eig, Mat};
use mflq_types::{hat, MatrixFn, ProblemData, Result};
use serde::Serialize;

use crate::build::DeltaEquilibrium;

/// Absolute eigenvalue tolerance of the ordering check.
pub const ORDER_TOL: f64 = 1e-8;

/// Constant upper bounds of the weights.
#[derive(Debug, Clone)]
pub struct StarBounds {
    pub q: Mat,
    pub q_hat: Mat,
    pub r: Mat,
    pub r_hat: Mat,
    pub g: Mat,
    pub g_hat: Mat,
}

impl StarBounds {
    /// `λ_max·I` over the sampled triangle `t ≤ s` for the running weights,
    /// `G(T)` and `Ĝ(T)` for the terminal ones.
    pub fn sampled(problem: &ProblemData, samples: usize) -> Self {
        let p = problem;
        let hc = hat(p);
        let big = samples.max(2);
        let ts: Vec<f64> = (0..=big).map(|i| p.horizon * i as f64 / big as f64).collect();
        let mut lam = [0.0f64; 4];
        for (i, &s) in ts.iter().enumerate() {
            for &t in &ts[..=i] {
                lam[0] = lam[0].max(max_eig(&p.q.eval(s, t)));
                lam[1] = lam[1].max(max_eig(&hc.q.eval(s, t)));
                lam[2] = lam[2].max(max_eig(&p.r.eval(s, t)));
                lam[3] = lam[3].max(max_eig(&hc.r.eval(s, t)));
            }
        }
        let (n, m) = (p.n, p.m);
        StarBounds {
            q: eye(n) * lam[0],
            q_hat: eye(n) * lam[1],
            r: eye(m) * lam[2],
            r_hat: eye(m) * lam[3],
            g: p.g.eval(p.horizon),
            g_hat: hc.g.eval(p.horizon),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderingReport {
    /// Smallest eigenvalue of each difference in the chains, over all nodes.
    pub margins: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub holds: bool,
}

fn constant(m: &Mat) -> MatrixFn {
    MatrixFn::constant(m.clone())
}

fn path_fn(p: &MatrixPath) -> MatrixFn {
    let n = p.first().nrows();
    let inner = Arc::new(p.clone());
    MatrixFn::custom((n, n), move |s| inner.eval(s))
}

/// Eigenvalue checks of
/// `0 ⪯ Γ̃_ℓ ⪯ P_k ⪯ P*_k ⪯ Π*_k` and `0 ⪯ Γ̂_ℓ ⪯ P̂_k ⪯ P̂*_k ⪯ Π̂_*`
/// on every node of interval `k`, for all `ℓ < k`. The starred quantities
/// solve the same recursion with the constant weights of `bounds`.
pub fn ordering_check(problem: &ProblemData, eq: &DeltaEquilibrium, bounds: &StarBounds) -> Result<OrderingReport> {
    let p = problem;
    let hc = hat(p);
    let nn = eq.players();
    let n = p.n;
    let mut star: Vec<Option<RiccatiPair>> = vec![None; nn];
    let mut pi_star: Vec<Option<MatrixPath>> = vec![None; nn];
    let mut gamma_right = bounds.g.clone();
    let mut p_hat_right = bounds.g_hat.clone();
    for k in (0..nn).rev() {
        let sub = eq.interval_grid(k);
        let mut data = PairData::from_problem(p, eq.partition.nodes()[k]);
        data.q = constant(&bounds.q);
        data.q_hat = constant(&bounds.q_hat);
        data.r = constant(&bounds.r);
        data.r_hat = constant(&bounds.r_hat);
        data.g = gamma_right.clone();
        data.g_hat = p_hat_right.clone();
        data.delta = min_eig(&bounds.r).min(min_eig(&bounds.r_hat)) * 0.5;
        let pair = solve_riccati_pair(&data, sub)?;
        pi_star[k] = Some(solve_lyapunov_on(&p.a, &Sandwich::Own(p.c.clone()), &constant(&bounds.q), &gamma_right, sub)?);
        let shared = Arc::new(pair.clone());
        let (ah, bh) = (hc.a.clone(), hc.b.clone());
        let pr = shared.clone();
        let a_cl = MatrixFn::custom((n, n), move |s| ah.eval(s) - bh.eval(s) * pr.gains_at(s).expect("gain").1);
        let (ch, dh) = (hc.c.clone(), hc.d.clone());
        let pr = shared.clone();
        let c_cl = MatrixFn::custom((n, n), move |s| ch.eval(s) - dh.eval(s) * pr.gains_at(s).expect("gain").1);
        let (qs, rs) = (bounds.q.clone(), bounds.r.clone());
        let pr = shared;
        let forcing = MatrixFn::custom((n, n), move |s| {
            let th = pr.gains_at(s).expect("gain").1;
            &qs + th.transpose() * &rs * &th
        });
        let g_prev = solve_lyapunov_on(
            &a_cl,
            &Sandwich::External {
                c: c_cl,
                inner: path_fn(&pair.p),
            },
            &forcing,
            &gamma_right,
            sub,
        )?;
        gamma_right = g_prev.first().clone();
        p_hat_right = pair.p_hat.first().clone();
        star[k] = Some(pair);
    }
    // Π̂_* over [0, T], reading the piecewise Π*.
    let mut pi_hat: Vec<Option<MatrixPath>> = vec![None; nn];
    let mut terminal = bounds.g_hat.clone();
    for k in (0..nn).rev() {
        let path = solve_lyapunov_on(
            &hc.a,
            &Sandwich::External {
                c: hc.c.clone(),
                inner: path_fn(pi_star[k].as_ref().unwrap()),
            },
            &constant(&bounds.q_hat),
            &terminal,
            eq.interval_grid(k),
        )?;
        terminal = path.first().clone();
        pi_hat[k] = Some(path);
    }

    let mut margins: BTreeMap<String, f64> = BTreeMap::new();
    let mut note = |name: &str, m: &Mat| {
        let e = min_eig(m);
        let slot = margins.entry(name.to_string()).or_insert(f64::INFINITY);
        *slot = slot.min(e);
    };
    for k in 0..nn {
        let sp = star[k].as_ref().unwrap();
        let (pis, pih) = (pi_star[k].as_ref().unwrap(), pi_hat[k].as_ref().unwrap());
        for j in 0..sp.p.len() {
            let i = eq.nodes[k] + j;
            let (pk, phk) = eq.p_at(k, i);
            note("P", pk);
            note("P* - P", &(&sp.p.values()[j] - pk));
            note("Pi* - P*", &(&pis.values()[j] - &sp.p.values()[j]));
            note("P^", phk);
            note("P^* - P^", &(&sp.p_hat.values()[j] - phk));
            note("Pi^* - P^*", &(&pih.values()[j] - &sp.p_hat.values()[j]));
            for l in 0..k {
                let tail = eq.tail(l, k);
                let gt = &tail.gamma_tilde.values()[j];
                let gh = &tail.gamma.values()[j] + &tail.gamma_bar.values()[j];
                note("Gamma~", gt);
                note("P - Gamma~", &(pk - gt));
                note("Gamma^", &gh);
                note("P^ - Gamma^", &(phk - &gh));
            }
        }
    }
    let holds = margins.values().all(|&v| v >= -ORDER_TOL);
    Ok(OrderingReport {
        margins,
        tolerance: ORDER_TOL,
        holds,
    })
}
