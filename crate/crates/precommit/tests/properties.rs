use mflq_precommit::{cost_via_lyapunov, precommit_bounds, LayeredWeights, MeanFieldGenerator};
use mflq_types::linalg::{min_eig, scalar, Mat};
use mflq_types::{MatrixFn, ProblemData, TwoTimeMatrixFn};
use proptest::prelude::*;

fn c(x: f64) -> MatrixFn {
    MatrixFn::constant(scalar(x))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn riccati_below_lyapunov_bounds(
        a in -1.0f64..1.0, ab in -1.0f64..1.0, b in -1.0f64..1.0, bb in -1.0f64..1.0,
        cc in -1.0f64..1.0, cb in -1.0f64..1.0, d in -1.0f64..1.0, db in -1.0f64..1.0,
        q in 0.0f64..2.0, qb in -0.5f64..1.0, r in 0.5f64..2.0, rb in 0.0f64..1.0,
        g in 0.0f64..2.0, gb in 0.0f64..1.0,
    ) {
        let mut p = ProblemData::new(1, 1, 1.0);
        p.a = c(a); p.a_bar = c(ab); p.b = c(b); p.b_bar = c(bb);
        p.c = c(cc); p.c_bar = c(cb); p.d = c(d); p.d_bar = c(db);
        p.q = TwoTimeMatrixFn::constant(scalar(q));
        p.q_bar = TwoTimeMatrixFn::constant(scalar(qb.max(-q)));
        p.r = TwoTimeMatrixFn::constant(scalar(r));
        p.r_bar = TwoTimeMatrixFn::constant(scalar(rb));
        p.g = c(g); p.g_bar = c(gb);
        p.delta = 0.25;
        let (_, rep) = precommit_bounds(&p, 0.0, 5e-3).unwrap();
        prop_assert!(rep.checks.holds, "{:?}", rep.checks);
    }

    #[test]
    fn layered_positivity(
        e in prop::collection::vec(-1.0f64..1.0, 16),
        w in prop::collection::vec(0.0f64..1.0, 6),
    ) {
        let m = |k: usize| MatrixFn::constant(Mat::from_row_slice(2, 2, &e[k..k + 4]));
        let gen = MeanFieldGenerator { a: m(0), a_bar: m(4), c: m(8), c_bar: m(12) };
        let diag = |x: f64, y: f64| Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![x, y]));
        // Q, Q + Q̃, Q + Q̃ + Q̄ ⪰ 0 and G, G + Ḡ ⪰ 0 with some negative bars
        let lw = LayeredWeights {
            q: MatrixFn::constant(diag(w[0], w[1])),
            q_tilde: MatrixFn::constant(diag(w[2], w[3])),
            q_bar: MatrixFn::constant(diag(-0.5 * w[2], -0.5 * w[3])),
            g: diag(w[4], w[5]),
            g_bar: diag(-0.5 * w[4], 0.3),
        };
        let ev = cost_via_lyapunov(&gen, &lw, 0.0, 1.0, 5e-3).unwrap();
        let t = &ev.triple;
        for i in 0..t.gamma.len() {
            let (gt, g, gb) = (&t.gamma_tilde.values()[i], &t.gamma.values()[i], &t.gamma_bar.values()[i]);
            let tol = 1e-8 * (1.0 + g.amax());
            prop_assert!(min_eig(gt) >= -tol);
            prop_assert!(min_eig(g) >= -tol);
            prop_assert!(min_eig(&(g + gb)) >= -tol);
        }
    }
}
