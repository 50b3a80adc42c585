mod common;

use std::f64::consts::PI;

use common::{diagonal_inverse, max_abs_diff, seeded_box};
use hadamard_core::linalg::{distance, norm2};
use hadamard_core::right_inverse::initial_field;
use hadamard_core::*;

type Profile = fn(f64) -> f64;

fn config() -> DescentConfig {
    DescentConfig::default()
}

#[test]
fn diagonal_maps_match_bisection() {
    let cases: [(MapInstance, Profile); 3] = [
        (MapInstance::sine_perturbed(4, 0.5).unwrap(), |x| x + 0.5 * x.sin()),
        (MapInstance::cubic(3).unwrap(), |x| x * x * x + x),
        (MapInstance::arctan_drift(2, 1.0).unwrap(), |x| x + x.atan()),
    ];
    for (seed, (f, phi)) in cases.iter().enumerate() {
        for y in seeded_box(f.dimension(), -10.0, 10.0, 25, seed as u64) {
            let report = solve_pointwise(f, &y, &vec![0.0; y.len()], &config()).unwrap();
            assert_eq!(report.status, SolveStatus::Converged, "{} y={y:?}", f.name());
            let oracle = diagonal_inverse(*phi, &y);
            assert!(max_abs_diff(&report.solution, &oracle) < 1e-8, "{}: {:?} vs {oracle:?}", f.name(), report.solution);
        }
    }
}

#[test]
fn compliant_runs_respect_decrease_direction_and_path_bounds() {
    let maps = [
        MapInstance::sine_perturbed(4, 0.25).unwrap(),
        MapInstance::coupled_sine(6, 0.5).unwrap(),
        MapInstance::cubic(2).unwrap(),
        MapInstance::arctan_drift(5, 1.0).unwrap(),
    ];
    for f in &maps {
        let m = f.known_inverse_bound().unwrap();
        for y in seeded_box(f.dimension(), -20.0, 20.0, 15, 99) {
            let r = solve_pointwise(f, &y, &vec![0.0; y.len()], &config()).unwrap();
            assert_eq!(r.status, SolveStatus::Converged);
            let t = &r.trace;
            assert_eq!(t.sufficient_decrease_violations(0.5), 0);
            assert_eq!(t.direction_bound_violations(m), 0);
            assert!(t.cumulative_path_length <= 2.0 * m * t.initial_merit * (1.0 + 1e-9));
            let sum: f64 = t.records.iter().map(|r| r.step_norm).sum();
            assert_eq!(sum, t.cumulative_path_length);
            assert!(t.records.windows(2).all(|w| w[1].merit_before < w[0].merit_before));
            assert_eq!(r.direction_bound_ok, Some(true));
            assert_eq!(r.path_bound_ok, Some(true));
        }
    }
}

#[test]
fn newton_proposer_on_affine_through_the_generic_driver() {
    let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![0.0, 1.0, -1.0], vec![0.5, 0.0, 2.0]]).unwrap();
    let f = MapInstance::affine(a.clone(), vec![1.0, 0.0, -1.0]).unwrap();
    let m = inverse_spectral_norm(&a).unwrap();
    let y = [3.0, -2.0, 8.0];
    let cfg = config();
    let out = descent_drive(
        |x: &Vec<f64>| residual_norm(&f, x, &y),
        |x: &Vec<f64>, merit| {
            let w = newton_direction(&f, x, &y)?;
            let ls = line_search(|t| residual_norm(&f, &linalg::step_point(x, &w, t), &y), merit, &cfg)?;
            Ok(Proposal {
                state: linalg::step_point(x, &w, ls.t),
                merit: ls.merit,
                t: ls.t,
                step_norm: ls.t * norm2(&w),
                backtracks: ls.backtracks,
            })
        },
        vec![0.0; 3],
        &cfg,
    )
    .unwrap();
    assert_eq!(out.status, SolveStatus::Converged);
    assert!(out.trace.iterations() <= 2);
    assert!(out.trace.cumulative_path_length <= 2.0 * m * out.trace.initial_merit);
    // telescoping with r = 1/(2M): r |x* - x0| <= μ(x0)
    assert!(norm2(&out.state) / (2.0 * m) <= out.trace.initial_merit * (1.0 + 1e-9));
}

#[test]
fn local_convergence_is_quadratic() {
    let maps = [
        MapInstance::cubic(2).unwrap(),
        MapInstance::sine_perturbed(3, 0.5).unwrap(),
        MapInstance::coupled_sine(4, 0.5).unwrap(),
    ];
    let tight = DescentConfig { tol_residual: 1e-13, ..config() };
    for f in &maps {
        for y in seeded_box(f.dimension(), -8.0, 8.0, 5, 3) {
            let r = solve_pointwise(f, &y, &vec![0.0; y.len()], &tight).unwrap();
            assert_eq!(r.status, SolveStatus::Converged);
            let tail: Vec<&IterationRecord> = r.trace.records.iter().filter(|rec| rec.merit_before < 1e-2).collect();
            assert!(!tail.is_empty());
            for rec in tail.iter().rev().take(3) {
                assert_eq!(rec.accepted_t, 1.0, "{}: full step expected near the root", f.name());
                if rec.merit_after > 1e-13 {
                    let c = rec.merit_after / (rec.merit_before * rec.merit_before);
                    assert!(c < 50.0, "{}: ratio {c}", f.name());
                }
            }
        }
    }
}

#[test]
fn derivative_of_the_solve_map_is_the_inverse_jacobian() {
    let maps = [MapInstance::sine_perturbed(3, 0.5).unwrap(), MapInstance::coupled_sine(3, 0.5).unwrap()];
    let h = 1e-5;
    for f in &maps {
        for y in seeded_box(3, -6.0, 6.0, 5, 17) {
            let base = solve_pointwise(f, &y, &[0.0; 3], &config()).unwrap();
            let x_star = base.solution;
            let inv_j = {
                let lu = lu_factor(&f.jacobian(&x_star).unwrap()).unwrap();
                let mut m = DenseMatrix::zeros(3, 3);
                for j in 0..3 {
                    let mut e = vec![0.0; 3];
                    e[j] = 1.0;
                    m.set_column(j, &lu.solve(&e));
                }
                m
            };
            let mut fd = DenseMatrix::zeros(3, 3);
            for j in 0..3 {
                let mut plus = y.clone();
                plus[j] += h;
                let mut minus = y.clone();
                minus[j] -= h;
                let xp = solve_pointwise(f, &plus, &x_star, &config()).unwrap().solution;
                let xm = solve_pointwise(f, &minus, &x_star, &config()).unwrap().solution;
                let col: Vec<f64> = xp.iter().zip(&xm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
                fd.set_column(j, &col);
            }
            let rel = fd.sub(&inv_j).frobenius_norm() / inv_j.frobenius_norm();
            assert!(rel < 1e-4, "{}: rel {rel}", f.name());
        }
    }
}

#[test]
fn right_inverse_of_cubic_on_three_points() {
    let f = MapInstance::cubic(1).unwrap();
    let sample = sample_segment_image(&f, &[1.0], 3).unwrap();
    let g0 = initial_field(&sample, 1);
    let r = solve_right_inverse(&f, sample, g0, &config()).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    for (g, expect) in r.state.g_values().iter().zip([0.0, 0.5, 1.0]) {
        let oracle = diagonal_inverse(|x| x * x * x + x, &[expect * expect * expect + expect])[0];
        assert!((g[0] - oracle).abs() < 1e-8);
        assert!((g[0] - expect).abs() < 1e-8);
    }
}

#[test]
fn right_inverse_on_a_circle_is_two_lipschitz() {
    let f = MapInstance::sine_perturbed(4, 0.5).unwrap();
    let targets: Vec<Vec<f64>> = (0..50)
        .map(|j| {
            let th = 2.0 * PI * j as f64 / 50.0;
            vec![3.0 * th.cos(), 3.0 * th.sin(), 0.0, 0.0]
        })
        .collect();
    let sample = CompactSample::new(targets.clone()).unwrap();
    let r = solve_right_inverse(&f, sample, vec![vec![0.0; 4]; 50], &config()).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    assert!(r.state.merit() <= 1e-10);
    assert_eq!(r.path_bound_ok, Some(true));
    assert_eq!(r.trace.sufficient_decrease_violations(0.5), 0);
    assert_eq!(r.trace.direction_bound_violations(2.0), 0);
    let g = r.state.g_values();
    for j in 0..50 {
        let i = (j + 1) % 50;
        assert!(distance(&g[i], &g[j]) <= 2.0 * distance(&targets[i], &targets[j]) + 4e-10);
        let oracle = diagonal_inverse(|x| x + 0.5 * x.sin(), &targets[j]);
        assert!(max_abs_diff(&g[j], &oracle) < 1e-8);
    }
}

#[test]
fn first_functional_step_obeys_direction_bound() {
    let f = MapInstance::sine_perturbed(3, 0.5).unwrap();
    let sample = CompactSample::new(seeded_box(3, -10.0, 10.0, 10, 5)).unwrap();
    let st = RightInverseState::zeros(&f, sample).unwrap();
    let (next, rec) = functional_step(&f, &st, &config()).unwrap();
    let m = estimate_inverse_bound(&f, &maps::uniform_box_samples(3, -PI, PI, 200, 1)).unwrap();
    assert!(m <= 2.0 + 1e-9);
    assert!(rec.direction_norm() <= 2.0 * st.merit());
    assert!(next.merit() <= (1.0 - rec.accepted_t / 2.0) * st.merit() + 1e-15);
    assert_eq!(next.merit(), next.recompute_merit(&f));
}

#[test]
fn singleton_right_inverse_replays_the_pointwise_solve() {
    for (f, y) in [
        (MapInstance::cubic(1).unwrap(), vec![10.0]),
        (MapInstance::coupled_sine(3, 0.5).unwrap(), vec![-4.0, 9.0, 1.5]),
        (MapInstance::arctan_drift(2, 1.0).unwrap(), vec![30.0, -12.0]),
    ] {
        let x0 = vec![0.0; y.len()];
        let p = solve_pointwise(&f, &y, &x0, &config()).unwrap();
        let sample = CompactSample::new(vec![y.clone()]).unwrap();
        let r = solve_right_inverse(&f, sample, vec![x0], &config()).unwrap();
        assert_eq!(r.trace.records, p.trace.records);
        assert_eq!(r.state.g_values()[0], p.solution);
        assert_eq!(r.status, p.status);
    }
}

#[test]
fn sine_lifts_are_consistent() {
    let f = MapInstance::sine_perturbed(4, 0.5).unwrap();
    for dir in seeded_box(4, -1.0, 1.0, 8, 21) {
        let scale = 5.0 / norm2(&dir);
        let a: Vec<f64> = dir.iter().map(|v| v * scale).collect();
        let r = lift_analysis(&f, &a, 50, &config(), DEFAULT_TOL_LIFT).unwrap();
        assert_eq!(r.verdict, Verdict::ConsistentWithInjectivity);
        assert_eq!(r.t_bar, 1.0);
        assert!(r.lift_errors.iter().all(|&e| e < 1e-6));
    }
}

#[test]
fn refining_the_segment_never_lowers_t_bar() {
    let maps = [MapInstance::coupled_sine(3, 0.5).unwrap(), MapInstance::cubic(3).unwrap()];
    for f in &maps {
        for a in seeded_box(3, -4.0, 4.0, 4, 8) {
            let mut prev = 0.0;
            for m in [5, 10, 20, 40] {
                let r = lift_analysis(f, &a, m, &config(), DEFAULT_TOL_LIFT).unwrap();
                assert!(r.t_bar >= prev);
                prev = r.t_bar;
            }
        }
    }
}

#[test]
fn near_collision_on_sine_certifies_equality() {
    let f = MapInstance::sine_perturbed(4, 0.5).unwrap();
    let b = vec![0.7, -1.1, 2.0, 0.3];
    let mut a = b.clone();
    a[0] += 1e-13;
    assert!(distance(&f.evaluate(&a).unwrap(), &f.evaluate(&b).unwrap()) <= 1e-10);
    let r = certify_pair(&f, &a, &b, 50, &config(), DEFAULT_TOL_LIFT).unwrap();
    assert_eq!(r.verdict, Verdict::ConsistentWithInjectivity);
    assert_eq!(r.t_bar, 1.0);
}

#[test]
fn exp_spiral_certificate_finds_the_second_sheet() {
    let f = MapInstance::exp_spiral();
    let r = certify_pair(&f, &[0.0, 2.0 * PI], &[0.0, 0.0], 100, &config(), DEFAULT_TOL_LIFT).unwrap();
    assert_eq!(r.verdict, Verdict::DistinctPreimagesDetected);
    assert!(r.t_bar < 1.0);
    // up to the last grid point the lift follows t a' exactly
    let before_last = &r.lift_errors[..r.lift_errors.len() - 1];
    assert!(before_last.iter().all(|&e| e < 1e-8));
    assert!((r.terminal_error().unwrap() - 2.0 * PI).abs() < 0.1 * 2.0 * PI);
}
