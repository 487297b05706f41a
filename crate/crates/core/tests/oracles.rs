mod common;

use common::*;
use mshot::sense::KrylovMethod;
use mshot::*;
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn fft_matches_dense_dft() {
    for n in [4, 8] {
        let x = random_image(n, &mut rng(n as u64));
        let fast = fft2c(&x).unwrap();
        let dense = dense_dft(n) * vectorize_image(&x);
        for (a, b) in fast.data().iter().zip(dense.iter()) {
            assert!((a - b).norm() <= 1e-12);
        }
    }
}

#[test]
fn encode_matches_dense_matrix() {
    let n = 4;
    let coils = simulate_coils(n, 2).unwrap();
    let traj = make_trajectory(TrajectoryKind::Random, n, 2, 3).unwrap();
    for mask in [SamplingMask::full(n), traj.mask(1).unwrap()] {
        let e = dense_encoding(&coils, &mask);
        assert_eq!(e.nrows(), 2 * mask.count());
        assert_eq!(e.ncols(), 16);
        let x = random_image(n, &mut rng(5));
        let fast = vectorize_data(&encode(&x, &coils, &mask).unwrap());
        let dense = &e * vectorize_image(&x);
        assert!(rel_err(&fast, &dense) <= 1e-12);
    }
}

#[test]
fn adjoint_matches_dense_conjugate_transpose() {
    let n = 4;
    let coils = simulate_coils(n, 2).unwrap();
    let mask = make_trajectory(TrajectoryKind::CartesianParallel2D, n, 2, 0)
        .unwrap()
        .mask(0)
        .unwrap();
    let y = random_data(n, 2, &mask, &mut rng(6));
    let fast = vectorize_image(&adjoint(&y, &coils).unwrap());
    let dense = dense_encoding(&coils, &mask).adjoint() * vectorize_data(&y);
    assert!(rel_err(&fast, &dense) <= 1e-12);
}

#[test]
fn cg_matches_pseudo_inverse_parallel_1d() {
    let n = 8;
    let coils = simulate_coils(n, 2).unwrap();
    let mask = make_trajectory(TrajectoryKind::CartesianParallel1D, n, 2, 0)
        .unwrap()
        .mask(0)
        .unwrap();
    let y = random_data(n, 2, &mask, &mut rng(7));
    let cfg = ReconConfig {
        max_iters: 200,
        tol: 1e-13,
        ..ReconConfig::default()
    };
    let (x, report) = cg_sense(&y, &coils, &cfg).unwrap();
    let oracle = dense_pseudo_inverse_solve(&dense_encoding(&coils, &mask), &vectorize_data(&y));
    let err = rel_err(&vectorize_image(&x), &oracle);
    assert!(report.converged);
    assert!(err <= 1e-8, "relative error {err}");
}

#[test]
fn cg_and_cr_match_pseudo_inverse_on_all_grids() {
    for n in [4, 8] {
        for shots in [2, 4] {
            for kind in TrajectoryKind::ALL {
                let traj = make_trajectory(kind, n, shots, 11).unwrap();
                let mask = drop_last_shot(&traj);
                let coils = simulate_coils(n, 4).unwrap();
                let y = random_data(n, 4, &mask, &mut rng(100 + n as u64 * 10 + shots as u64));
                let oracle =
                    dense_pseudo_inverse_solve(&dense_encoding(&coils, &mask), &vectorize_data(&y));
                for method in [
                    KrylovMethod::ConjugateGradient,
                    KrylovMethod::ConjugateResidual,
                ] {
                    let cfg = ReconConfig {
                        max_iters: 500,
                        tol: 1e-14,
                        precondition: true,
                        method,
                    };
                    let (x, report) = cg_sense(&y, &coils, &cfg).unwrap();
                    let err = rel_err(&vectorize_image(&x), &oracle);
                    assert!(err <= 1e-8, "{kind} n={n} S={shots} {method:?}: {err}");
                    // plain CG residuals may rise between iterations; CR's may not
                    if method == KrylovMethod::ConjugateResidual {
                        for w in report.residuals.windows(2) {
                            assert!(
                                w[1] <= w[0] + 1e-12,
                                "{kind} n={n} S={shots}: {:?}",
                                report.residuals
                            );
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn consistent_data_is_reproduced() {
    let n = 8;
    let coils = simulate_coils(n, 4).unwrap();
    for kind in TrajectoryKind::ALL {
        let mask = drop_last_shot(&make_trajectory(kind, n, 4, 2).unwrap());
        let y = encode(&random_image(n, &mut rng(8)), &coils, &mask).unwrap();
        let cfg = ReconConfig {
            max_iters: 500,
            tol: 1e-14,
            ..ReconConfig::default()
        };
        let (x, _) = cg_sense(&y, &coils, &cfg).unwrap();
        let again = encode(&x, &coils, &mask).unwrap();
        let a = vectorize_data(&again);
        let b = vectorize_data(&y);
        assert!(rel_err(&a, &b) <= 1e-8, "{kind}");
    }
}

#[test]
fn forward_corrupt_matches_dense_motion_oracle() {
    let n = 8;
    let coils = simulate_coils(n, 2).unwrap();
    let schedule = RigidMotionSchedule::new(vec![
        RigidMotion::rotation(0.0),
        RigidMotion::rotation(10.0),
    ])
    .unwrap();
    let x = random_image(n, &mut rng(9));
    let xv = vectorize_image(&x);
    let f = dense_dft(n);
    for kind in TrajectoryKind::ALL {
        let traj = make_trajectory(kind, n, 2, 4).unwrap();
        let fast = forward_corrupt(&x, &coils, &traj, &schedule).unwrap();
        for (c, coil) in coils.maps().iter().enumerate() {
            let weights = CMat::from_diagonal(&vectorize_image(coil));
            let mut expected = CVec::zeros(n * n);
            for (s, m) in schedule.shots().iter().enumerate() {
                let moved = dense_rigid(n, m.theta_deg, m.tx, m.ty) * &xv;
                let k = &f * (&weights * moved);
                let seg = traj.mask(s).unwrap();
                for (i, &b) in seg.bits().iter().enumerate() {
                    if b {
                        expected[i] += k[i];
                    }
                }
            }
            let got = CVec::from_column_slice(fast.grids()[c].data());
            assert!(
                (got - &expected).norm() <= 1e-12 * expected.norm(),
                "{kind} coil {c}"
            );
        }
    }
}

#[test]
fn translated_motion_matches_dense_oracle() {
    let n = 8;
    let x = random_image(n, &mut rng(12));
    let fast = apply_rigid(&x, -7.5, 1.25, -0.5).unwrap();
    let dense = dense_rigid(n, -7.5, 1.25, -0.5) * vectorize_image(&x);
    assert!(rel_err(&vectorize_image(&fast), &dense) <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjointness(seed in any::<u64>(), log_n in 2u32..=4, kind_ix in 0usize..4, coil_ix in 0usize..3) {
        let n = 1usize << log_n;
        let n_coils = [1, 2, 4][coil_ix];
        let kind = TrajectoryKind::ALL[kind_ix];
        let coils = simulate_coils(n, n_coils).unwrap();
        let mask = make_trajectory(kind, n, 2, seed).unwrap().mask(0).unwrap();
        let mut r = rng(seed);
        let x = random_image(n, &mut r);
        let y = random_data(n, n_coils, &mask, &mut r);
        let lhs: Complex64 = encode(&x, &coils, &mask).unwrap().inner_product(&y).unwrap();
        let rhs = x.inner_product(&adjoint(&y, &coils).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * x.l2_norm() * y.l2_norm());
    }
}
