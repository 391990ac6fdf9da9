use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fixtrack_core::oracle::tracking_error_sq;
use fixtrack_core::problem::RelaxedProblem;
use fixtrack_core::{
    brute_force_ustar, run_scenario, solve_ustar, tracking_error, CaseStudy, OracleConfig, ScenarioConfig,
    ScenarioKey,
};

fn problem() -> RelaxedProblem<CaseStudy> {
    RelaxedProblem::with_defaults(CaseStudy::default(), 0.01, 1.0).unwrap()
}

fn v(s: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(s)
}

#[test]
fn origin_minimizer_is_zero() {
    let p = problem();
    let cfg = OracleConfig::default();
    let x = DVector::zeros(3);
    for t in [0.0, 2.5] {
        let n = solve_ustar(&p, &x, t, None, &cfg).unwrap();
        assert!(n.u.norm() < 1e-12);
        let g = brute_force_ustar(&p, &x, t, &cfg).unwrap();
        assert!(g.u.amax() <= g.cell);
    }
}

#[test]
fn newton_minimizer_beats_random_probes() {
    let p = problem();
    let x0 = v(&[-9.0, -7.0, -5.0]);
    let star = solve_ustar(&p, &x0, 0.0, None, &OracleConfig::default()).unwrap();
    assert!(star.grad_norm <= 1e-10);
    assert!(p.grad_u_relaxed(&star.u, &x0, 0.0).unwrap().norm() <= 1e-10);
    let best = p.relaxed_cost(&star.u, &x0, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut probes = 0;
    while probes < 10_000 {
        let u = &star.u + DVector::from_fn(2, |_, _| rng.gen_range(-20.0..20.0));
        let c = p.relaxed_cost(&u, &x0, 0.0).unwrap();
        if c.is_finite() {
            assert!(best <= c + 1e-9);
            probes += 1;
        }
    }
}

#[test]
fn newton_and_grid_agree_at_random_points() {
    let p = problem();
    let cfg = OracleConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let x = DVector::from_fn(3, |_, _| rng.gen_range(-10.0..10.0));
        let t = rng.gen_range(0.0..6.0);
        let n = solve_ustar(&p, &x, t, None, &cfg).unwrap();
        let g = brute_force_ustar(&p, &x, t, &cfg).unwrap();
        assert!((&n.u - &g.u).norm() <= 2.0 * g.cell, "x = {x}");
        assert!(p.phi_minus_gamma(&g.u, &x).unwrap() < 0.0);
    }
}

#[test]
fn warm_started_solves_along_a_run_are_short() {
    let run = run_scenario(&ScenarioConfig::defaults(ScenarioKey::CaseStudy)).unwrap();
    let recs = &run.trajectory.records;
    assert!(recs.iter().skip(1).all(|r| r.oracle_iterations <= 10));
    assert!(recs.iter().all(|r| r.ustar_grad_norm <= 1e-10));
}

#[test]
fn iteration_cap_is_reported() {
    let p = problem();
    let cfg = OracleConfig {
        max_iters: 1,
        ..OracleConfig::default()
    };
    assert!(solve_ustar(&p, &v(&[-9.0, -7.0, -5.0]), 0.0, None, &cfg).is_err());
}

#[test]
fn infeasible_warm_start_falls_back_to_feedback() {
    let p = problem();
    let x0 = v(&[-9.0, -7.0, -5.0]);
    let cfg = OracleConfig::default();
    let cold = solve_ustar(&p, &x0, 0.0, None, &cfg).unwrap();
    let warm = solve_ustar(&p, &x0, 0.0, Some(&v(&[-40.0, 0.0])), &cfg).unwrap();
    assert!((cold.u - warm.u).norm() < 1e-9);
}

#[test]
fn tracking_error_examples() {
    let z = v(&[0.0, 0.0]);
    assert_eq!(tracking_error(&z, &z), 0.0);
    assert_eq!(tracking_error(&v(&[1.0, 0.0]), &z), 1.0);
    assert_eq!(tracking_error(&v(&[3.0, 4.0]), &z), 5.0);
    assert_eq!(tracking_error_sq(&v(&[3.0, 4.0]), &z), 25.0);
}
