use mflq_ode::*;
use mflq_types::linalg::{eye, min_eig, norm_inf, tau_psd, zeros, Mat};
use mflq_types::MatrixFn;
use proptest::prelude::*;

fn c(m: Mat) -> MatrixFn {
    MatrixFn::constant(m)
}

fn small_mat(r: usize, cols: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-1.0f64..1.0, r * cols).prop_map(move |v| Mat::from_vec(r, cols, v))
}

fn psd(n: usize) -> impl Strategy<Value = Mat> {
    small_mat(n, n).prop_map(|l| &l * l.transpose())
}

/// Max error at the start point of `solve_riccati` with step `h` against `h/8`.
fn order_errors(co: &RiccatiCoefficients) -> (f64, f64) {
    let reference = solve_riccati(co, 0.0, 1.0, 0.1 / 8.0).unwrap();
    let e = |h: f64| {
        let s = solve_riccati(co, 0.0, 1.0, h).unwrap();
        s.p.times()
            .iter()
            .zip(s.p.values())
            .map(|(&t, v)| norm_inf(&(v - reference.p.eval(t))))
            .fold(0.0, f64::max)
    };
    (e(0.1), e(0.05))
}

#[test]
fn rk4_fourth_order() {
    let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.2]);
    let b = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
    let cc = Mat::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.2]);
    let d = Mat::from_row_slice(2, 1, &[0.0, 0.3]);
    let q = eye(2);
    let co = RiccatiCoefficients::new(c(a), c(b), c(cc), c(d), c(q), c(eye(1)), eye(2) * 2.0);
    let (e1, e2) = order_errors(&co);
    let ratio = e1 / e2;
    assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn comparison_theorem(a in small_mat(2, 2), b in small_mat(2, 1), cc in small_mat(2, 2),
                          d in small_mat(2, 1), q in psd(2), g in psd(2)) {
        let co = RiccatiCoefficients::new(c(a.clone()), c(b), c(cc.clone()), c(d), c(q.clone()), c(eye(1)), g.clone());
        let sol = solve_riccati(&co, 0.0, 1.0, 0.01).unwrap();
        let pi = solve_lyapunov(&c(a), Some(&c(cc)), &c(q), &g, 0.0, 1.0, 0.01).unwrap();
        for (p, pv) in sol.p.values().iter().zip(pi.values()) {
            prop_assert!(min_eig(p) >= -tau_psd(p));
            prop_assert!(min_eig(&(pv - p)) >= -tau_psd(pv));
        }
    }

    #[test]
    fn gain_consistency(a in small_mat(2, 2), b in small_mat(2, 1), q in psd(2), g in psd(2)) {
        let co = RiccatiCoefficients::new(c(a), c(b), c(zeros(2, 2)), c(zeros(2, 1)), c(q), c(eye(1)), g);
        let sol = solve_riccati(&co, 0.0, 1.0, 0.02).unwrap();
        for ((&s, p), th) in sol.p.times().iter().zip(sol.p.values()).zip(sol.theta.values()) {
            let again = riccati_gain(&co, s, p).unwrap();
            prop_assert!(norm_inf(&(again - th)) <= 1e-12 * (1.0 + norm_inf(th)));
        }
    }

    #[test]
    fn push_through_identity(l in small_mat(3, 2)) {
        // I − Λ(I + ΛᵀΛ)⁻¹Λᵀ = (I + ΛΛᵀ)⁻¹
        let lhs = eye(3) - &l * (eye(2) + l.transpose() * &l).try_inverse().unwrap() * l.transpose();
        let rhs = (eye(3) + &l * l.transpose()).try_inverse().unwrap();
        prop_assert!(norm_inf(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn lyapunov_output_symmetric(a in small_mat(3, 3), q in psd(3)) {
        let p = solve_lyapunov(&c(a), None, &c(q), &eye(3), 0.0, 1.0, 0.05).unwrap();
        for v in p.values() {
            prop_assert!(norm_inf(&(v - v.transpose())) <= 1e-9 * (1.0 + norm_inf(v)));
        }
    }
}
