use std::fs;
use std::path::Path;
use std::time::Instant;

use mflq_closedloop::{refinement_study, residual, solve_closed_loop, ClosedLoopSolution, Refinement};
use mflq_game::{build_delta_equilibrium, delta_local_optimality_check, jump_magnitudes, DeltaEquilibrium};
use mflq_openloop::{default_probes, solve_open_loop, verify_open_loop_equilibrium};
use mflq_precommit::solve_precommitment;
use mflq_sim::{estimate_cost, semigroup_failure_demo, simulate_policy, write_paths_binary, AffinePolicy, InitialState, MCConfig};
use mflq_types::json::{apply_override, problem_from_value};
use mflq_types::{validate as check_hypotheses, MflqError, PiecewiseGain, ProblemData, RefinementRow, TimeGrid};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::out::{mat_cells, mat_header, num, Out};
use crate::{Check, CliError, Common, Policy};

const CLOSED_LOOP_TOL: f64 = 1e-4;
const CONVERGE_TOL: f64 = 1e-3;
const CONVERGE_DOUBLINGS: usize = 4;

struct Loaded {
    problem: ProblemData,
    sha256: String,
}

fn load(c: &Common) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(&c.problem).map_err(|e| CliError::Input(format!("{}: {e}", c.problem.display())))?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| MflqError::Parse(format!("{}: {e}", c.problem.display())))?;
    for o in &c.overrides {
        apply_override(&mut doc, o)?;
    }
    // Keys are sorted, so the digest does not depend on file layout.
    let canonical = serde_json::to_string(&doc).map_err(|e| CliError::Other(e.to_string()))?;
    let sha256 = Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    Ok(Loaded {
        problem: problem_from_value(&doc)?,
        sha256,
    })
}

fn x0(c: &Common, p: &ProblemData) -> Result<Vec<f64>, CliError> {
    match &c.x0 {
        None => Ok(vec![1.0; p.n]),
        Some(v) if v.len() == p.n => Ok(v.clone()),
        Some(v) => Err(CliError::Input(format!("--x0 has {} entries, the state has {}", v.len(), p.n))),
    }
}

fn mc(c: &Common) -> MCConfig {
    MCConfig::new(c.paths, c.steps, c.seed)
}

#[derive(Serialize)]
struct Meta<'a> {
    command: &'a str,
    problem: String,
    problem_sha256: &'a str,
    overrides: &'a [String],
    h: f64,
    tol: Option<f64>,
    seed: u64,
    paths: usize,
    steps: usize,
    #[serde(rename = "N0")]
    n0: usize,
    max_doublings: Option<usize>,
    x0: Option<&'a [f64]>,
    version: &'static str,
    extra: Value,
}

fn meta(out: &Out, cmd: &str, c: &Common, l: &Loaded, extra: Value) -> Result<(), CliError> {
    out.json(
        "meta.json",
        &Meta {
            command: cmd,
            problem: c.problem.display().to_string(),
            problem_sha256: &l.sha256,
            overrides: &c.overrides,
            h: c.h,
            tol: c.tol,
            seed: c.seed,
            paths: c.paths,
            steps: c.steps,
            n0: c.n0,
            max_doublings: c.max_doublings,
            x0: c.x0.as_deref(),
            version: env!("CARGO_PKG_VERSION"),
            extra,
        },
    )
}

pub fn validate(c: &Common, density: usize) -> Result<(), CliError> {
    let l = load(c)?;
    let rep = check_hypotheses(&l.problem, density)?;
    print!("{rep}");
    if rep.passes() {
        Ok(())
    } else {
        Err(CliError::Input(format!("{} hypothesis violations", rep.violations.len())))
    }
}

pub fn precommit(c: &Common, t: f64) -> Result<(), CliError> {
    let l = load(c)?;
    let x = x0(c, &l.problem)?;
    let sol = solve_precommitment(&l.problem, t, c.h)?;
    let out = Out::new(&c.out)?;
    let pair = &sol.pair;
    out.path_csv("p.csv", "p", pair.p.times(), pair.p.values())?;
    out.path_csv("p_hat.csv", "p_hat", pair.p_hat.times(), pair.p_hat.values())?;
    out.path_csv("theta.csv", "theta", sol.theta().times(), sol.theta().values())?;
    out.path_csv("theta_hat.csv", "theta_hat", sol.theta_hat().times(), sol.theta_hat().values())?;
    let value = sol.value_at(&x);
    println!("pre-commitment value at t={} (snapped by {:e}): {}", sol.t, sol.snap, num(value));
    out.json(
        "summary.json",
        &json!({"t": sol.t, "snap": sol.snap, "x0": x, "value": value, "p_hat_start": sol.p_hat_at_start().as_slice()}),
    )?;
    meta(&out, "precommit", c, &l, json!({"t": t}))
}

pub fn open_loop(c: &Common) -> Result<(), CliError> {
    let l = load(c)?;
    let sol = solve_open_loop(&l.problem, c.h)?;
    let out = Out::new(&c.out)?;
    out.path_csv("theta.csv", "theta", sol.theta.times(), sol.theta.values())?;
    out.path_csv("p_diag.csv", "p", sol.p_diag.times(), sol.p_diag.values())?;
    out.path_csv("p_hat_diag.csv", "p_hat", sol.p_hat_diag.times(), sol.p_hat_diag.values())?;
    println!("open-loop gain on {} nodes, max asymmetry {:e}", sol.grid().len(), sol.max_asymmetry);
    out.json("summary.json", &json!({"nodes": sol.grid().len(), "max_asymmetry": sol.max_asymmetry}))?;
    meta(&out, "open-loop", c, &l, Value::Null)
}

fn refinement(c: &Common, tol: f64, extrapolate: bool) -> Refinement {
    let d = Refinement::default();
    Refinement {
        n0: c.n0,
        max_doublings: c.max_doublings.unwrap_or(d.max_doublings),
        tol,
        extrapolate,
    }
}

fn write_closed_loop(out: &Out, sol: &ClosedLoopSolution) -> Result<(), CliError> {
    out.path_csv("theta_hat.csv", "theta_hat", sol.theta_hat.times(), sol.theta_hat.values())?;
    out.path_csv("theta.csv", "theta", sol.theta.times(), sol.theta.values())?;
    let nodes = sol.gamma.t_nodes();
    let first = sol.gamma.diag(0);
    let mut header = vec!["t".to_string()];
    header.extend(mat_header("gamma", first));
    header.extend(mat_header("gamma_hat", first));
    let rows: Vec<Vec<String>> = nodes
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let mut r = vec![num(t)];
            r.extend(mat_cells(sol.gamma.diag(j)));
            r.extend(mat_cells(sol.gamma_hat.diag(j)));
            r
        })
        .collect();
    out.csv("gamma_diag.csv", &header, &rows)
}

pub fn closed_loop(c: &Common, extrapolate: bool) -> Result<(), CliError> {
    let l = load(c)?;
    let tol = c.tol.unwrap_or(CLOSED_LOOP_TOL);
    let out = Out::new(&c.out)?;
    meta(&out, "closed-loop", c, &l, json!({"tol_used": tol, "extrapolate": extrapolate}))?;
    let sol = match solve_closed_loop(&l.problem, &refinement(c, tol, extrapolate)) {
        Ok(s) => s,
        Err(MflqError::NoConvergence { trace }) => {
            out.json("trace.json", &trace)?;
            print_trace(&trace);
            return Err(MflqError::NoConvergence { trace }.into());
        }
        Err(e) => return Err(e.into()),
    };
    out.json("trace.json", &sol.convergence_trace)?;
    print_trace(&sol.convergence_trace);
    write_closed_loop(&out, &sol)?;
    let res = residual(&sol, &l.problem);
    let x = x0(c, &l.problem)?;
    let (v, _) = sol.value_at(0.0, &x);
    println!("equilibrium value at t=0: {}", num(v));
    out.json(
        "summary.json",
        &json!({"N": sol.partition.intervals(), "residual": {"gamma": res.gamma, "gamma_hat": res.gamma_hat}, "x0": x, "value": v}),
    )
}

fn print_trace(trace: &[RefinementRow]) {
    println!("{:>6} {:>12} {:>12} {:>12} {:>9}", "N", "dGamma", "dGammaHat", "dThetaHat", "wall[s]");
    for r in trace {
        println!(
            "{:>6} {:>12.3e} {:>12.3e} {:>12.3e} {:>9.2}",
            r.n, r.sup_delta_gamma, r.sup_delta_gamma_hat, r.sup_delta_theta, r.wall_seconds
        );
    }
}

fn partition(p: &ProblemData, n: usize) -> Result<TimeGrid, CliError> {
    if n == 0 {
        return Err(CliError::Input("--N must be positive".into()));
    }
    Ok(TimeGrid::uniform(p.horizon, n)?)
}

fn write_game(out: &Out, eq: &DeltaEquilibrium) -> Result<(), CliError> {
    let (th0, thh0) = eq.gains.eval_in(0, eq.grid[0]);
    let mut header = vec!["s".to_string(), "k".to_string()];
    header.extend(mat_header("theta", &th0));
    header.extend(mat_header("theta_hat", &thh0));
    let mut rows = Vec::new();
    for k in 0..eq.players() {
        for &s in eq.interval_grid(k) {
            let (th, thh) = eq.gains.eval_in(k, s);
            let mut r = vec![num(s), k.to_string()];
            r.extend(mat_cells(&th));
            r.extend(mat_cells(&thh));
            rows.push(r);
        }
    }
    out.csv("gains.csv", &header, &rows)?;
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend(mat_header("value", &eq.values[0]));
    let rows: Vec<Vec<String>> = eq
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let mut r = vec![k.to_string(), num(eq.partition.nodes()[k])];
            r.extend(mat_cells(v));
            r
        })
        .collect();
    out.csv("values.csv", &header, &rows)
}

pub fn game(c: &Common, n: usize) -> Result<(), CliError> {
    let l = load(c)?;
    let part = partition(&l.problem, n)?;
    let eq = build_delta_equilibrium(&l.problem, &part, c.h)?;
    let out = Out::new(&c.out)?;
    write_game(&out, &eq)?;
    out.json("jumps.json", &jump_magnitudes(&l.problem, &eq))?;
    println!("{n}-player game on {} nodes", eq.grid.len());
    meta(&out, "game", c, &l, json!({"N": n}))
}

/// Round-off level below which deltas count as equal.
const DELTA_FLOOR: f64 = 1e-12;

/// Each delta is no larger than the one before.
fn monotone(rows: &[RefinementRow]) -> bool {
    let le = |a: f64, b: f64| a <= b + DELTA_FLOOR;
    rows.windows(2).all(|w| {
        le(w[1].sup_delta_gamma, w[0].sup_delta_gamma)
            && le(w[1].sup_delta_gamma_hat, w[0].sup_delta_gamma_hat)
            && le(w[1].sup_delta_theta, w[0].sup_delta_theta)
    })
}

pub fn converge(c: &Common) -> Result<(), CliError> {
    let l = load(c)?;
    let tol = c.tol.unwrap_or(CONVERGE_TOL);
    let doublings = c.max_doublings.unwrap_or(CONVERGE_DOUBLINGS);
    let out = Out::new(&c.out)?;
    meta(&out, "converge", c, &l, json!({"tol_used": tol, "doublings": doublings}))?;
    let rows = refinement_study(&l.problem, c.n0, doublings, false)?;
    print_trace(&rows);
    let mono = monotone(&rows);
    let last = rows.last().map_or(f64::INFINITY, |r| r.max_delta());
    let converged = mono && last < tol;
    println!("monotone: {mono}, final delta {last:.3e} (tol {tol:e})");
    // Wall times vary run to run, so they stay out of the CSV.
    let header: Vec<String> = ["N", "sup_delta_gamma", "sup_delta_gamma_hat", "sup_delta_theta_hat"].map(String::from).into();
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.n.to_string(), num(r.sup_delta_gamma), num(r.sup_delta_gamma_hat), num(r.sup_delta_theta)])
        .collect();
    out.csv("converge.csv", &header, &csv)?;
    out.json("converge.json", &json!({"rows": rows, "monotone": mono, "final_delta": last, "tol": tol, "converged": converged}))?;
    if converged {
        Ok(())
    } else {
        Err(MflqError::NoConvergence { trace: rows }.into())
    }
}

fn policy_gains(c: &Common, p: &ProblemData, policy: Policy, n: usize) -> Result<(PiecewiseGain, usize), CliError> {
    Ok(match policy {
        Policy::ClosedLoop => {
            let sol = solve_closed_loop(p, &refinement(c, c.tol.unwrap_or(CLOSED_LOOP_TOL), true))?;
            (sol.gain(c.steps)?, c.steps)
        }
        Policy::Precommit => {
            let sol = solve_precommitment(p, 0.0, c.h)?;
            let (th, thh) = sol.gain_fns();
            (PiecewiseGain::new(TimeGrid::uniform(p.horizon, 1)?, vec![th], vec![thh])?, c.steps)
        }
        Policy::OpenLoop => (solve_open_loop(p, c.h)?.gain()?, c.steps),
        Policy::Game => {
            let eq = build_delta_equilibrium(p, &partition(p, n)?, c.h)?;
            (eq.gains, c.steps.div_ceil(n) * n)
        }
    })
}

pub fn simulate(c: &Common, policy: Policy, n: usize, dump: bool) -> Result<(), CliError> {
    let l = load(c)?;
    let p = &l.problem;
    let x = x0(c, p)?;
    let (gains, steps) = policy_gains(c, p, policy, n)?;
    let cfg = MCConfig { steps, ..mc(c) };
    let ens = simulate_policy(p, &AffinePolicy::from_gains(&gains), None, 0.0, InitialState::fixed(&x), &cfg, dump)?;
    let (cost, se) = estimate_cost(p, &ens, 0.0)?;
    let out = Out::new(&c.out)?;
    let mut header = vec!["s".to_string()];
    header.extend((0..p.n).map(|i| format!("mean_{i}")));
    header.extend((0..p.n).map(|i| format!("std_{i}")));
    let rows: Vec<Vec<String>> = ens
        .summary_rows()
        .iter()
        .map(|r| {
            let mut row = vec![num(r.time)];
            row.extend(r.empirical_mean.iter().map(|&v| num(v)));
            row.extend(r.std.iter().map(|&v| num(v)));
            row
        })
        .collect();
    out.csv("mean.csv", &header, &rows)?;
    if dump {
        let path = out.path("paths.bin");
        let f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        write_paths_binary(&ens, std::io::BufWriter::new(f))?;
    }
    println!("cost at t=0: {} ± {}", num(cost), num(se));
    out.json("cost.json", &json!({"cost": cost, "stderr": se, "x0": x, "steps": steps}))?;
    meta(&out, "simulate", c, &l, json!({"policy": format!("{policy:?}"), "N": n, "dump_paths": dump}))
}

pub fn verify(c: &Common, check: Check, n: usize) -> Result<(), CliError> {
    let l = load(c)?;
    let p = &l.problem;
    let x = x0(c, p)?;
    let out = Out::new(&c.out)?;
    let (report, passes) = match check {
        Check::Game => {
            let eq = build_delta_equilibrium(p, &partition(p, n)?, c.h)?;
            let mut reps = Vec::new();
            for k in 0..n {
                let probes = mflq_game::default_probes(&eq, k, c.seed);
                let r = delta_local_optimality_check(p, &eq, k, &x, &probes, &mc(c))?;
                println!("player {k}: {}", if r.passes { "pass" } else { "fail" });
                reps.push(r);
            }
            let ok = reps.iter().all(|r| r.passes);
            (serde_json::to_value(&reps), ok)
        }
        Check::OpenLoop => {
            let sol = solve_open_loop(p, c.h)?;
            let times: Vec<f64> = [0.0, 0.25, 0.5].iter().map(|f| f * p.horizon).collect();
            let eps: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|f| f * p.horizon).collect();
            let r = verify_open_loop_equilibrium(p, &sol, &x, &times, &eps, &default_probes(p.n, p.m), &mc(c))?;
            println!("open-loop: min ratio {:.3e}, {}", r.min_ratio, if r.passes { "pass" } else { "fail" });
            let ok = r.passes;
            (serde_json::to_value(&r), ok)
        }
        Check::Residual => {
            let tol = c.tol.unwrap_or(CLOSED_LOOP_TOL);
            let sol = solve_closed_loop(p, &refinement(c, tol, true))?;
            let r = residual(&sol, p);
            // The residual of a first-order level is O(mesh).
            let bound = 10.0 * tol.max(sol.partition.mesh());
            let ok = r.max() <= bound;
            println!("residual {:.3e} (bound {bound:.3e}): {}", r.max(), if ok { "pass" } else { "fail" });
            (Ok(json!({"gamma": r.gamma, "gamma_aux": r.gamma_aux, "gamma_hat": r.gamma_hat, "bound": bound})), ok)
        }
    };
    let report = report.map_err(|e| CliError::Other(e.to_string()))?;
    out.json("verify.json", &json!({"check": format!("{check:?}"), "passes": passes, "report": report}))?;
    meta(&out, "verify", c, &l, json!({"check": format!("{check:?}"), "N": n}))?;
    if passes {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{check:?} check failed")))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn demo_semigroup(t: f64, tau: f64, s: f64, x: f64, paths: usize, steps: usize, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let started = Instant::now();
    let d = semigroup_failure_demo(s, tau, t, x, &MCConfig::new(paths, steps, seed))?;
    println!("restart discrepancy E|X(s) - X_tau(s)|^2 at (t, tau, s) = ({t}, {tau}, {s}), x = {x}");
    println!("  simulated   {:.6} ± {:.6}", d.simulated, d.stderr);
    println!("  closed form {:.6} ({})", d.closed_form, if d.agrees() { "agrees" } else { "differs" });
    println!("  reference   {:.6} (without the -1 in the restarted factor)", d.reference_form);
    if let Some(dir) = out {
        let o = Out::new(dir)?;
        o.json(
            "semigroup.json",
            &json!({"t": t, "tau": tau, "s": s, "x": x, "paths": paths, "steps": steps, "seed": seed,
                    "simulated": d.simulated, "stderr": d.stderr, "closed_form": d.closed_form,
                    "reference_form": d.reference_form, "agrees": d.agrees(),
                    "version": env!("CARGO_PKG_VERSION")}),
        )?;
    }
    eprintln!("({:.2}s)", started.elapsed().as_secs_f64());
    Ok(())
}
