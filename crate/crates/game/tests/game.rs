use mflq_game::{
    build_delta_equilibrium, default_probes, delta_local_optimality_check, gamma_hat_consistency, jump_magnitudes,
    ordering_check, DeltaEquilibrium, StarBounds,
};
use mflq_ode::{solve_riccati, RiccatiCoefficients};
use mflq_precommit::solve_precommitment;
use mflq_sim::oracles::{ex12_p_hat, ex12_problem};
use mflq_sim::MCConfig;
use mflq_types::json::problem_from_str;
use mflq_types::linalg::{norm_inf, Mat};
use mflq_types::{MflqError, ProblemData, TimeGrid};

const H: f64 = 1e-3;

fn load(name: &str) -> ProblemData {
    let path = format!("{}/../../problems/{name}.json", env!("CARGO_MANIFEST_DIR"));
    problem_from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn build(p: &ProblemData, n: usize) -> DeltaEquilibrium {
    build_delta_equilibrium(p, &TimeGrid::uniform(p.horizon, n).unwrap(), H).unwrap()
}

fn s00(m: &Mat) -> f64 {
    m[(0, 0)]
}

#[test]
fn one_player_is_precommitment() {
    for name in ["meanfield", "discounting"] {
        let p = load(name);
        let eq = build(&p, 1);
        let pre = solve_precommitment(&p, 0.0, H).unwrap();
        assert_eq!(eq.pairs[0].p.values(), pre.p().values());
        assert_eq!(eq.pairs[0].p_hat.values(), pre.p_hat().values());
        assert_eq!(eq.values[0], *pre.p_hat_at_start());
        assert!(eq.tails[0].is_empty());
    }
}

#[test]
fn classical_problem_reduces_to_riccati() {
    let p = load("classical");
    let co = RiccatiCoefficients::new(
        p.a.clone(),
        p.b.clone(),
        p.c.clone(),
        p.d.clone(),
        p.q.frozen(0.0),
        p.r.frozen(0.0),
        p.g.eval(0.0),
    );
    let ric = solve_riccati(&co, 0.0, 1.0, H).unwrap();
    for n in [1, 3, 8] {
        let eq = build(&p, n);
        for k in 0..n {
            for (&s, (a, b)) in eq.interval_grid(k).iter().zip(eq.pairs[k].p.values().iter().zip(eq.pairs[k].p_hat.values())) {
                let r = ric.p.eval(s);
                assert!(norm_inf(&(a - &r)) <= 1e-8, "N={n} P_{k}({s})");
                assert!(norm_inf(&(b - &r)) <= 1e-8, "N={n} P̂_{k}({s})");
            }
        }
        for l in 0..n {
            for i in eq.nodes[(l + 1).min(n)]..eq.grid.len() {
                if l + 1 >= n {
                    break;
                }
                let r = ric.p.eval(eq.grid[i]);
                assert!(norm_inf(&(eq.gamma(l, i) - &r)) <= 1e-8);
                assert!(norm_inf(&eq.gamma_bar(l, i)) <= 1e-12);
            }
        }
    }
}

fn rk4_scalar(f: impl Fn(f64, f64) -> f64, y1: f64, s1: f64, s0: f64, steps: usize) -> f64 {
    let h = (s1 - s0) / steps as f64;
    let mut y = y1;
    let mut s = s1;
    for _ in 0..steps {
        let k1 = f(s, y);
        let k2 = f(s - h / 2.0, y - h / 2.0 * k1);
        let k3 = f(s - h / 2.0, y - h / 2.0 * k2);
        let k4 = f(s - h, y - h * k3);
        y -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        s -= h;
    }
    y
}

#[test]
fn example12_two_players_by_hand() {
    let p = ex12_problem(1.0);
    let eq = build(&p, 2);
    let last = &eq.pairs[1];
    assert_eq!(last.p.max_norm(), 0.0);
    for (&s, v) in eq.interval_grid(1).iter().zip(last.p_hat.values()) {
        assert!((s00(v) - ex12_p_hat(1.0, s)).abs() < 1e-10);
    }
    let mid = eq.nodes[1];
    assert!(s00(&eq.gamma_tilde(0, mid)).abs() < 1e-10);
    assert!((s00(&eq.gamma(0, mid)) - 2.0 / 9.0).abs() < 1e-10);
    assert!((s00(&eq.gamma_bar(0, mid)) - 4.0 / 9.0).abs() < 1e-10);
    assert!((s00(&eq.gamma_hat(0, mid)) - 2.0 / 3.0).abs() < 1e-10);
    for i in mid..eq.grid.len() {
        let s = eq.grid[i];
        assert!((s00(&eq.gamma(0, i)) - (1.0 - s) / ((2.0 - s) * (2.0 - s))).abs() < 1e-10, "Γ at {s}");
    }
    let p0 = |s: f64| 1.0 / (1.0 + 3.5 * (s - 0.5).exp());
    for (&s, v) in eq.interval_grid(0).iter().zip(eq.pairs[0].p.values()) {
        assert!((s00(v) - p0(s)).abs() < 1e-10, "P_0 at {s}");
    }
    let ph0 = rk4_scalar(|s, y| y * y - p0(s), 2.0 / 3.0, 0.5, 0.0, 20_000);
    assert!((s00(&eq.values[0]) - ph0).abs() < 1e-9);
    assert!(ph0 > 0.5);
}

#[test]
fn stitched_terminals_match() {
    let p = load("meanfield");
    let eq = build(&p, 4);
    for k in 0..3 {
        let j = eq.nodes[k + 1];
        let (pk, phk) = (eq.pairs[k].p.last(), eq.pairs[k].p_hat.last());
        assert_eq!(*pk, eq.gamma(k, j));
        assert!(norm_inf(&(phk - eq.gamma_hat(k, j))) <= 1e-14);
    }
    assert_eq!(*eq.pairs[3].p.last(), p.g.eval(eq.partition.nodes()[3]));
}

#[test]
fn gamma_hat_equation_is_consistent() {
    for name in ["meanfield", "discounting", "ex12"] {
        let p = if name == "ex12" { ex12_problem(1.0) } else { load(name) };
        let eq = build(&p, 4);
        let err = gamma_hat_consistency(&p, &eq).unwrap();
        assert!(err <= 1e-8, "{name}: {err:e}");
    }
}

#[test]
fn jumps_vanish_without_time_dependence() {
    let p = load("classical");
    let eq = build(&p, 6);
    for row in jump_magnitudes(&p, &eq) {
        assert!(row.gamma + row.gamma_tilde + row.gamma_hat <= 1e-10, "{row:?}");
        assert!(row.within);
    }
}

#[test]
fn jumps_shrink_linearly_with_the_mesh() {
    let p = load("discounting");
    let worst = |n: usize| {
        let eq = build(&p, n);
        let rows = jump_magnitudes(&p, &eq);
        assert!(rows.iter().all(|r| r.within), "{rows:?}");
        rows.iter().map(|r| r.gamma + r.gamma_hat).fold(0.0, f64::max)
    };
    let (a, b) = (worst(8), worst(16));
    let ratio = a / b;
    assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn ordering_chain_holds() {
    let p = load("discounting");
    let bounds = StarBounds::sampled(&p, 64);
    for n in [2, 5] {
        let eq = build(&p, n);
        let rep = ordering_check(&p, &eq, &bounds).unwrap();
        assert!(rep.holds, "N={n}: {:?}", rep.margins);
    }
}

#[test]
fn values_stay_bounded_under_refinement() {
    let p = load("meanfield");
    let sup = |n: usize| {
        let eq = build(&p, n);
        eq.pairs.iter().map(|pr| pr.p_hat.max_norm().max(pr.p.max_norm())).fold(0.0, f64::max)
    };
    let base = sup(4);
    for n in [8, 16, 32] {
        assert!(sup(n) <= 1.05 * base, "N={n}");
    }
}

#[test]
fn local_optimality_example12() {
    let p = ex12_problem(1.0);
    let eq = build(&p, 4);
    let mc = MCConfig::new(100_000, 80, 2024);
    for k in 0..4 {
        let probes = default_probes(&eq, k, 7);
        assert_eq!(probes.len(), 10);
        let rep = delta_local_optimality_check(&p, &eq, k, &[1.0], &probes, &mc).unwrap();
        assert!(rep.passes, "{rep:?}");
    }
}

#[test]
fn misaligned_grid_is_rejected() {
    let p = load("classical");
    let part = TimeGrid::new(vec![0.0, 0.3, 1.0]).unwrap();
    let grid: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
    assert!(matches!(mflq_game::build_delta_equilibrium_on(&p, &part, &grid), Err(MflqError::Config(_))));
}
