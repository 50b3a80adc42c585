use hadamard_core::linalg::{distance, norm2};
use hadamard_core::maps::default_fd_step;
use hadamard_core::*;
use proptest::prelude::*;

fn registry_maps(n: usize) -> Vec<MapInstance> {
    let a = DenseMatrix::from_row_major(n, n, (0..n * n).map(|i| ((i * 7 % 5) as f64) - 2.0 + if i % (n + 1) == 0 { 6.0 } else { 0.0 }).collect()).unwrap();
    let mut maps = vec![
        MapInstance::affine(a, vec![0.5; n]).unwrap(),
        MapInstance::sine_perturbed(n, 0.5).unwrap(),
        MapInstance::coupled_sine(n, 0.5).unwrap(),
        MapInstance::cubic(n).unwrap(),
        MapInstance::arctan_drift(n, 1.0).unwrap(),
        MapInstance::arctan_flat(n).unwrap(),
    ];
    if n == 2 {
        maps.push(MapInstance::exp_spiral());
    }
    maps
}

fn vec_strategy(n: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, n)
}

fn matrix_strategy(n: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-1.0..1.0_f64, n * n).prop_map(move |mut v| {
        for i in 0..n {
            v[i * n + i] += if i % 2 == 0 { 3.0 } else { -3.0 };
        }
        DenseMatrix::from_row_major(n, n, v).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analytic_jacobians_match_central_differences(x in vec_strategy(2, 3.0), y in vec_strategy(4, 3.0)) {
        for point in [x, y] {
            for f in registry_maps(point.len()) {
                let jac = f.jacobian(&point).unwrap();
                let fd = jacobian_fd(&f, &point, default_fd_step(&point)).unwrap();
                let err = jac.sub(&fd).frobenius_norm() / (1.0 + jac.frobenius_norm());
                prop_assert!(err < 1e-5, "{}: {err}", f.name());
            }
        }
    }

    #[test]
    fn evaluation_is_pure(x in vec_strategy(2, 10.0)) {
        for f in registry_maps(2) {
            let (a, b) = (f.evaluate(&x).unwrap(), f.evaluate(&x).unwrap());
            prop_assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
            let (ja, jb) = (f.jacobian(&x).unwrap(), f.jacobian(&x).unwrap());
            prop_assert!(ja.as_slice().iter().zip(jb.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn sine_inverse_bound_never_exceeds_analytic(k in 0.0..0.95_f64, pts in prop::collection::vec(vec_strategy(3, 10.0), 1..20)) {
        let f = MapInstance::sine_perturbed(3, k).unwrap();
        let m = estimate_inverse_bound(&f, &pts).unwrap();
        prop_assert!(m <= 1.0 / (1.0 - k) + 1e-9);
    }

    #[test]
    fn affine_alpha_vanishes(a in matrix_strategy(3), pts in prop::collection::vec(vec_strategy(3, 5.0), 1..6)) {
        let f = MapInstance::affine(a, vec![1.0, 2.0, 3.0]).unwrap();
        let est = linearization_modulus(&f, &pts, 1.0, &[1e-1, 1e-2, 1e-3, 1e-4], 4, 42).unwrap();
        prop_assert!(est.alpha_values.iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn lu_reconstructs_and_solves(a in matrix_strategy(6), b in vec_strategy(6, 10.0)) {
        let lu = lu_factor(&a).unwrap();
        let recon = lu.reconstruct().sub(&a).max_abs();
        prop_assert!(recon <= 1e-12 * a.frobenius_norm());
        let x = solve_linear(&lu, &b).unwrap();
        let resid = distance(&a.mul_vec(&x), &b);
        prop_assert!(resid <= 1e-10 * (a.frobenius_norm() * norm2(&x) + norm2(&b)));
    }

    #[test]
    fn inversion_is_continuous(a in matrix_strategy(4), e in prop::collection::vec(-1.0..1.0_f64, 16), b in vec_strategy(4, 5.0)) {
        let e = DenseMatrix::from_row_major(4, 4, e).unwrap();
        let e_norm = e.frobenius_norm();
        prop_assume!(e_norm > 0.0);
        let pert = e.scaled(1e-6 * a.frobenius_norm() / e_norm);
        let x = solve_linear(&lu_factor(&a).unwrap(), &b).unwrap();
        let xp = solve_linear(&lu_factor(&a.add(&pert)).unwrap(), &b).unwrap();
        let inv = inverse_spectral_norm(&a).unwrap();
        let c = 10.0 * inv * inv * norm2(&b);
        prop_assert!(distance(&x, &xp) <= c * pert.frobenius_norm());
    }

    #[test]
    fn trace_csv_round_trips(rows in prop::collection::vec((0.0..1.0_f64, 0.0..1e3_f64, 0.0..1e3_f64, 0.0..1e2_f64, 0usize..40), 0..30)) {
        let mut trace = DescentTrace::new(rows.first().map_or(0.0, |r| r.1));
        for (i, (t, before, after, step, bt)) in rows.into_iter().enumerate() {
            trace.push(IterationRecord { index: i, merit_before: before, accepted_t: t, step_norm: step, merit_after: after, backtrack_count: bt });
        }
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        prop_assert_eq!(DescentTrace::read_csv_records(buf.as_slice()).unwrap(), trace.records);
    }
}
