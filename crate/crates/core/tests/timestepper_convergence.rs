mod common;

use std::sync::Arc;

use common::{eoc, reference};
use parabolic_apost::fem1d::{sup_norm_sampled, Discretization};
use parabolic_apost::problem::{builtin_test_problem, ProblemConfig, SourceConfig, SpaceFnConfig};
use parabolic_apost::reference_oracle::error_at_t;
use parabolic_apost::timestepper::{delta_t, initial_field, run, InitialApprox, TimeGrid};

#[test]
fn one_step_euler_is_first_order() {
    let spec = builtin_test_problem();
    let elements = 512;
    let reference = reference(&spec, elements, 1e-9);
    let disc = Discretization::uniform(&spec, elements).unwrap();
    let errors: Vec<f64> = [16, 32, 64, 128, 256]
        .iter()
        .map(|&m| {
            let grid = TimeGrid::uniform(1.0, m).unwrap();
            let traj = run(&disc, &grid, InitialApprox::Interpolant).unwrap();
            error_at_t(&disc.mesh, &traj.v[m], &reference)
        })
        .collect();
    let rates: Vec<f64> = errors.windows(2).map(|w| eoc(w[0], w[1])).collect();
    // pre-asymptotic at M = 16, 32; the rate decreases towards 1
    for w in rates.windows(2) {
        assert!(w[1] < w[0], "rates {rates:?}");
    }
    for p in &rates[2..] {
        assert!((p - 1.0).abs() <= 0.1, "one-step rates {rates:?}");
    }
}

#[test]
fn interpolation_is_second_order() {
    let spec = builtin_test_problem();
    let u0 = spec.initial.clone();
    let err = |n: usize| {
        let disc = Discretization::uniform(&spec, n).unwrap();
        let field = initial_field(&disc, InitialApprox::Interpolant).unwrap();
        sup_norm_sampled(&disc.mesh, 33, |e, x| {
            field.eval_in(&disc.mesh, e, x) - u0(x)
        })
    };
    for n in [8, 16, 32, 64] {
        let ratio = err(n) / err(2 * n);
        assert!((ratio - 4.0).abs() < 0.2, "N={n}: ratio {ratio}");
    }
    let disc = Discretization::uniform(&spec, 8).unwrap();
    let field = initial_field(&disc, InitialApprox::Interpolant).unwrap();
    assert!((field.eval(&disc.mesh, 0.0) - 1.0).abs() < 1e-15);
}

#[test]
fn zero_initial_value_gives_zero_field() {
    let mut cfg = ProblemConfig::builtin_test_problem();
    cfg.initial = SpaceFnConfig::Zero;
    let spec = cfg.build().unwrap();
    let disc = Discretization::uniform(&spec, 10).unwrap();
    for approx in [InitialApprox::Interpolant, InitialApprox::L2Projection] {
        assert_eq!(initial_field(&disc, approx).unwrap().sup_norm(), 0.0);
    }
}

#[test]
fn discrete_maximum_principle() {
    let mut cfg = ProblemConfig::builtin_test_problem();
    cfg.source = SourceConfig::TimePolynomial {
        coeffs: vec![1.0, 2.0],
    };
    let spec = cfg.build().unwrap();
    for m in [8, 32, 128] {
        let disc = Discretization::uniform(&spec, 2 * m).unwrap();
        let grid = TimeGrid::uniform(1.0, m).unwrap();
        let traj = run(&disc, &grid, InitialApprox::Interpolant).unwrap();
        for v in &traj.v {
            assert!(v.values.iter().all(|&x| x >= -1e-12));
        }
    }
}

#[test]
fn extrapolation_identity_is_bit_exact() {
    let spec = builtin_test_problem();
    let disc = Discretization::uniform(&spec, 24).unwrap();
    let grid = TimeGrid::new(vec![0.0, 0.1, 0.25, 0.3, 0.7, 1.0]).unwrap();
    let traj = run(&disc, &grid, InitialApprox::Interpolant).unwrap();
    assert_eq!(traj.u[0], traj.v[0]);
    assert_eq!(traj.w[0], traj.v[0]);
    for j in 0..=grid.steps() {
        assert_eq!(traj.u[j], traj.w_at(j).lincomb(2.0, &traj.v[j], -1.0));
        assert!(traj.u[j].vanishes_on_boundary());
    }
}

#[test]
fn difference_quotient_is_linear() {
    let spec = builtin_test_problem();
    let disc = Discretization::uniform(&spec, 16).unwrap();
    let grid = TimeGrid::uniform(1.0, 8).unwrap();
    let traj = run(&disc, &grid, InitialApprox::Interpolant).unwrap();
    for j in 1..=8 {
        let tau = grid.tau(j);
        let lhs = delta_t(&traj.u[j], &traj.u[j - 1], tau);
        let rhs = delta_t(traj.w_at(j), traj.w_at(j - 1), tau).lincomb(
            2.0,
            &delta_t(&traj.v[j], &traj.v[j - 1], tau),
            -1.0,
        );
        assert!(lhs.max_abs_diff(&rhs) <= 1e-12 * lhs.sup_norm().max(1.0));
        assert_eq!(delta_t(&traj.u[j], &traj.u[j], tau).sup_norm(), 0.0);
    }
}

#[test]
fn last_step_is_adjusted() {
    let grid = TimeGrid::with_step(1.0, 0.3).unwrap();
    assert_eq!(grid.horizon(), 1.0);
    assert_eq!(grid.steps(), 4);
    assert!((grid.tau(4) - 0.1).abs() < 1e-15);
}

#[test]
fn time_independent_problem_reaches_steady_state() {
    let mut spec = builtin_test_problem();
    spec.source = Arc::new(|x, _| 1.0 + x * x);
    let disc = Discretization::uniform(&spec, 32).unwrap();
    let steady = disc.stiffness.solve(&disc.source_load(0.0)).unwrap();
    let grid = TimeGrid::uniform(20.0, 200).unwrap();
    let traj = run(&disc, &grid, InitialApprox::Interpolant).unwrap();
    let last = traj.final_field().interior();
    let gap = last
        .iter()
        .zip(&steady)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(gap < 1e-8, "{gap}");
}
