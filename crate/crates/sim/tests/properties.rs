use mflq_sim::{simulate_policy, AffinePolicy, AffineSegment, InitialState, MCConfig};
use mflq_types::linalg::{mat, Mat};
use mflq_types::{MatrixFn, ProblemData, TimeGrid};
use proptest::prelude::*;

fn mean_field_problem(entries: &[f64]) -> ProblemData {
    let m2 = |k: usize| MatrixFn::constant(Mat::from_row_slice(2, 2, &entries[k..k + 4]));
    let mut p = ProblemData::new(2, 1, 1.0);
    p.a = m2(0);
    p.a_bar = m2(4);
    p.c = m2(8);
    p.c_bar = m2(12);
    p.b = MatrixFn::constant(mat(&[&[1.0], &[0.5]]));
    p.b_bar = MatrixFn::constant(mat(&[&[0.2], &[-0.3]]));
    p.d = MatrixFn::constant(mat(&[&[0.1], &[0.0]]));
    p
}

fn piecewise_policy() -> AffinePolicy {
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let segs = (0..4)
        .map(|k| AffineSegment {
            k: MatrixFn::constant(mat(&[&[0.3 + 0.1 * k as f64, -0.2]])),
            l: MatrixFn::constant(mat(&[&[0.1, 0.2 * k as f64]])),
            v: MatrixFn::zeros(1, 1),
        })
        .collect();
    AffinePolicy::new(grid, segs).unwrap()
}

#[test]
fn empirical_mean_tracks_the_mean_ode() {
    let entries = [
        0.2, -0.3, 0.1, 0.0, 0.1, 0.2, -0.1, 0.3, 0.3, 0.0, 0.1, 0.2, 0.1, -0.1, 0.0, 0.2,
    ];
    let p = mean_field_problem(&entries);
    let mc = MCConfig::new(20_000, 400, 8);
    let ens = simulate_policy(&p, &piecewise_policy(), None, 0.0, InitialState::fixed(&[1.0, -0.5]), &mc, false).unwrap();
    for i in (0..=400).step_by(10) {
        for c in 0..2 {
            let gap = (ens.empirical_mean()[i][c] - ens.cond_mean()[i][c]).abs();
            assert!(gap <= 3.0 * ens.mean_stderr()[i][c] + 1e-12, "node {i} comp {c}: {gap}");
        }
    }
}

#[test]
fn gaussian_initial_states_have_the_right_mean() {
    let p = ProblemData::new(2, 1, 1.0);
    let x0 = InitialState::Gaussian {
        mean: nalgebra::DVector::from_vec(vec![1.0, 2.0]),
        chol: mat(&[&[1.0, 0.0], &[0.5, 0.5]]),
    };
    let ens = simulate_policy(&p, &piecewise_policy(), None, 0.0, x0, &MCConfig::new(10_000, 4, 1), false).unwrap();
    let std0 = &ens.path_std()[0];
    assert!((std0[0] - 1.0).abs() < 0.05 && (std0[1] - 0.5f64.sqrt()).abs() < 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn identical_configs_are_bitwise_identical(seed in any::<u64>(), anti in any::<bool>(), entries in prop::collection::vec(-0.5f64..0.5, 16)) {
        let p = mean_field_problem(&entries);
        let mut mc = MCConfig::new(40, 40, seed);
        mc.antithetic = anti;
        let run = || simulate_policy(&p, &piecewise_policy(), None, 0.0, InitialState::fixed(&[1.0, 0.0]), &mc, true).unwrap();
        let (a, b) = (run(), run());
        for path in 0..40 {
            for i in 0..=40 {
                let (x, y) = (a.state(path, i).unwrap(), b.state(path, i).unwrap());
                prop_assert!(x.iter().zip(y).all(|(u, v)| u.to_bits() == v.to_bits()));
            }
        }
    }

    #[test]
    fn noiseless_runs_follow_the_mean(entries in prop::collection::vec(-0.5f64..0.5, 8)) {
        let mut all = entries.clone();
        all.extend([0.0; 8]);
        let mut p = mean_field_problem(&all);
        p.d = MatrixFn::zeros(2, 1);
        let mc = MCConfig::new(4, 800, 0);
        let ens = simulate_policy(&p, &piecewise_policy(), None, 0.0, InitialState::fixed(&[1.0, -1.0]), &mc, false).unwrap();
        for i in 0..=800 {
            prop_assert!(ens.mean_stderr()[i].amax() < 1e-12);
            prop_assert!((&ens.empirical_mean()[i] - &ens.cond_mean()[i]).amax() < 1e-2);
        }
    }
}
