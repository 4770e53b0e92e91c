use mflq_ode::*;
use mflq_types::linalg::{norm_inf, scalar, Mat};

fn march(grid: &[f64], lambda: f64) -> DiagonalField {
    // X_s(s,t) = Θ(s) sin(3s) − λ(s − t)X(s,t), X(T,t) = 1 + t, Θ(s) = X(s,s)/2.
    let terminal = |t: f64| vec![scalar(1.0 + t)];
    let factor = |_s: f64, x: &[Mat]| Ok(&x[0] * 0.5);
    let rhs = move |s: f64, t: f64, f: &Mat, x: &[Mat]| vec![f * (3.0 * s).sin() - &x[0] * (lambda * (s - t))];
    march_diagonal(&DiagonalMarch {
        grid,
        symmetric: true,
        terminal: &terminal,
        factor: &factor,
        rhs: &rhs,
        stride: 1,
    })
    .unwrap()
}

#[test]
fn slices_agree_with_direct_rk4_when_uncoupled_in_t() {
    let g = uniform_grid(0.0, 1.0, 400);
    let f = march(&g, 0.0);
    // With λ = 0 the slices differ only by their terminal shift t.
    for (k, &j) in f.kept.iter().enumerate() {
        let t = g[j];
        for (i, v) in f.slices[k][0].iter().enumerate() {
            let base = &f.slices[0][0][i + j];
            assert!((v[(0, 0)] - base[(0, 0)] - t).abs() < 1e-12);
        }
    }
}

#[test]
fn diagonal_march_converges_at_least_second_order() {
    let coarse = march(&uniform_grid(0.0, 1.0, 50), 0.5);
    let mid = march(&uniform_grid(0.0, 1.0, 100), 0.5);
    let fine = march(&uniform_grid(0.0, 1.0, 800), 0.5);
    let e1 = norm_inf(&(&coarse.factors[0] - &fine.factors[0]));
    let e2 = norm_inf(&(&mid.factors[0] - &fine.factors[0]));
    assert!(e1 / e2 >= 3.5, "ratio {}", e1 / e2);
}
