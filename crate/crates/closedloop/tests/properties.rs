use mflq_closedloop::{direct_diagonal_solve, game_level};
use mflq_types::linalg::scalar;
use mflq_types::{Discount, MatrixFn, ProblemData, TwoTimeMatrixFn};
use proptest::prelude::*;

fn c(x: f64) -> MatrixFn {
    MatrixFn::constant(scalar(x))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn game_and_direct_march_agree(
        a in -1.0f64..1.0, ab in -0.5f64..0.5, b in -1.0f64..1.0, bb in -0.5f64..0.5,
        cc in -0.5f64..0.5, cb in -0.3f64..0.3, d in -0.5f64..0.5, db in -0.3f64..0.3,
        q in 0.0f64..2.0, qb in 0.0f64..1.0, r in 0.5f64..2.0, rb in 0.0f64..1.0,
        g in 0.0f64..2.0, gb in 0.0f64..1.0, lambda in 0.0f64..1.0,
    ) {
        let mut p = ProblemData::new(1, 1, 1.0);
        p.a = c(a); p.a_bar = c(ab); p.b = c(b); p.b_bar = c(bb);
        p.c = c(cc); p.c_bar = c(cb); p.d = c(d); p.d_bar = c(db);
        p.q = TwoTimeMatrixFn::discounted(Discount::Exponential { lambda }, scalar(q));
        p.q_bar = TwoTimeMatrixFn::constant(scalar(qb));
        p.r = TwoTimeMatrixFn::discounted(Discount::Hyperbolic { lambda }, scalar(r));
        p.r_bar = TwoTimeMatrixFn::constant(scalar(rb));
        p.g = c(g); p.g_bar = c(gb);
        p.delta = 0.25 / (1.0 + lambda);
        let direct = direct_diagonal_solve(&p, 1.0 / 256.0).unwrap();
        let game = game_level(&p, 64).unwrap();
        prop_assert!(game.gamma.max_asymmetry() == 0.0);
        let scale = 1.0 + direct.gamma_hat.max_norm();
        // First-order game error: a loose multiple of the mesh 1/64.
        prop_assert!(direct.gamma.sup_diff(&game.gamma).unwrap() <= 0.05 * scale);
        prop_assert!(direct.gamma_hat.sup_diff(&game.gamma_hat).unwrap() <= 0.05 * scale);
    }
}
