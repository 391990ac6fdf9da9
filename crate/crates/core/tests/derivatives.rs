use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fixtrack_core::problem::{fd_jacobian, RelaxedProblem};
use fixtrack_core::{CaseStudy, DerivativeSource};

fn problem(src: DerivativeSource) -> RelaxedProblem<CaseStudy> {
    RelaxedProblem::with_defaults(CaseStudy::default(), 0.01, 1.0)
        .unwrap()
        .with_derivatives(src)
}

fn v(s: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(s)
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-8)
}

fn col(x: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(x.len(), 1, x.as_slice())
}

fn feasible_point(p: &RelaxedProblem<CaseStudy>, rng: &mut ChaCha8Rng) -> (DVector<f64>, DVector<f64>, f64) {
    loop {
        let x = DVector::from_fn(3, |_, _| rng.gen_range(-10.0..10.0));
        let u = CaseStudy::kappa1(&x) + DVector::from_fn(2, |_, _| rng.gen_range(-5.0..5.0));
        if p.phi_minus_gamma(&u, &x).unwrap() < -0.05 {
            return (u, x, rng.gen_range(0.0..6.0));
        }
    }
}

#[test]
fn gradient_and_hessian_match_finite_differences() {
    let p = problem(DerivativeSource::Analytic);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..300 {
        let (u, x, t) = feasible_point(&p, &mut rng);
        let g = p.grad_u_relaxed(&u, &x, t).unwrap();
        let h = p.hess_uu_relaxed(&u, &x, t).unwrap();
        let fd_g = fd_jacobian(&u, |u| v(&[p.relaxed_cost(u, &x, t).unwrap()])).transpose();
        let fd_h = fd_jacobian(&u, |u| p.grad_u_relaxed(u, &x, t).unwrap());
        assert!(rel(&col(&g), &fd_g) <= 1e-5, "grad at u={u} x={x}");
        assert!(rel(&h, &fd_h) <= 1e-4, "hess at u={u} x={x}");
    }
}

#[test]
fn mixed_time_partial_matches_finite_differences() {
    let p = problem(DerivativeSource::Analytic);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let (u, x, t) = feasible_point(&p, &mut rng);
        let h = 1e-2;
        let at = |k: f64| p.grad_u_relaxed(&u, &x, t + k * h).unwrap();
        let fd = (at(-2.0) - at(-1.0) * 8.0 + at(1.0) * 8.0 - at(2.0)) / (12.0 * h);
        let a = p.mixed_ut_relaxed(&u, &x, t).unwrap();
        assert!(rel(&col(&a), &col(&fd)) <= 1e-4);
    }
}

#[test]
fn dual_engine_matches_analytic_forms() {
    let a = problem(DerivativeSource::Analytic);
    let d = problem(DerivativeSource::Dual);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let (u, x, t) = feasible_point(&a, &mut rng);
        let pa = a.partials(&u, &x, t).unwrap();
        let pd = d.partials(&u, &x, t).unwrap();
        assert!(rel(&col(&pa.grad), &col(&pd.grad)) <= 1e-10);
        assert!(rel(&pa.hess, &pd.hess) <= 1e-10);
        assert!(rel(&pa.mixed_ux, &pd.mixed_ux) <= 1e-10);
        assert!(rel(&col(&pa.mixed_ut), &col(&pd.mixed_ut)) <= 1e-10);
        assert!((pa.cost - pd.cost).abs() <= 1e-12 * pa.cost.abs().max(1.0));
    }
}

#[test]
fn origin_examples() {
    let p = problem(DerivativeSource::Analytic);
    let x = DVector::zeros(3);
    let u = v(&[1.5, -2.0]);
    assert_eq!(p.phi(&u, &x).unwrap(), 0.0);
    assert!((p.relaxed_cost(&DVector::zeros(2), &x, 0.0).unwrap() - 100.0).abs() < 1e-12);
    let g = p.grad_u_relaxed(&u, &x, 0.7).unwrap();
    assert!((g - v(&[1.5, -6.0])).norm() < 1e-14);
    let h = p.hess_uu_relaxed(&u, &x, 0.7).unwrap();
    assert!((h - DMatrix::from_diagonal(&v(&[1.0, 3.0]))).norm() < 1e-14);
    assert!(p.mixed_ut_relaxed(&u, &x, 0.7).unwrap().norm() < 1e-15);
}

#[test]
fn initial_point_examples() {
    let p = problem(DerivativeSource::Analytic);
    let x0 = v(&[-9.0, -7.0, -5.0]);
    let u0 = v(&[16.0, 7.0]);
    assert!((p.phi(&u0, &x0).unwrap() + 237.5).abs() < 1e-12);
    let want = 0.5 * (256.0 + 3.0 * 49.0) + 1.0 / 237.51;
    assert!((p.relaxed_cost(&u0, &x0, 0.0).unwrap() - want).abs() < 1e-12);
    let ut = p.mixed_ut_relaxed(&u0, &x0, 0.0).unwrap();
    let expect = v(&[-7.0, -5.0]) * (-1.0 / (237.51 * 237.51));
    assert!((ut - expect).norm() < 1e-15);
}

#[test]
fn mixed_state_partial_has_constant_barrier_jacobian() {
    // g is constant and V = ½‖x‖², so D_x(∇ᵤφ) = gᵀ
    let p = problem(DerivativeSource::Analytic);
    let x = v(&[0.3, -0.2, 0.1]);
    let u = v(&[0.1, 0.2]);
    let d = fd_jacobian(&x, |x| p.phi_input_gradient(x));
    let gt = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    assert!((d - gt).norm() < 1e-9);
    assert!(p.mixed_ux_relaxed(&u, &x, 0.0).unwrap().iter().all(|v| v.is_finite()));
}

#[test]
fn infeasible_points_are_rejected() {
    let p = problem(DerivativeSource::Analytic);
    let x = v(&[-9.0, -7.0, -5.0]);
    let u = v(&[-40.0, 0.0]);
    assert!(p.phi_minus_gamma(&u, &x).unwrap() > 0.0);
    assert_eq!(p.relaxed_cost(&u, &x, 0.0).unwrap(), f64::INFINITY);
    assert!(p.grad_u_relaxed(&u, &x, 0.0).is_err());
    assert!(problem(DerivativeSource::Dual).partials(&u, &x, 0.0).is_err());
}

#[test]
fn barrier_blows_up_monotonically_toward_the_boundary() {
    let p = problem(DerivativeSource::Analytic);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (u, x, t) = feasible_point(&p, &mut rng);
        // φ is affine in u with slope a = gᵀx; walk along a until φ = γ
        let a = p.phi_input_gradient(&x);
        if a.norm() < 1e-3 {
            continue;
        }
        let z0 = p.phi_minus_gamma(&u, &x).unwrap();
        let s_hit = -z0 / a.norm_squared();
        let mut last = f64::NEG_INFINITY;
        let mut tail = 0.0;
        for k in 1..=40 {
            let frac = 1.0 - 0.5f64.powi(k);
            let c = p.relaxed_cost(&(&u + &a * (s_hit * frac)), &x, t).unwrap();
            if k > 20 {
                assert!(c > last, "not increasing at step {k}");
            }
            last = c;
            tail = c;
        }
        assert!(tail.is_finite() && tail > 1e6);
        assert_eq!(p.relaxed_cost(&(&u + &a * s_hit * 1.01), &x, t).unwrap(), f64::INFINITY);
    }
}

#[test]
fn phi_matches_expanded_case_study_algebra() {
    let p = problem(DerivativeSource::Analytic);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let x = DVector::from_fn(3, |_, _| rng.gen_range(-10.0..10.0));
        let u = DVector::from_fn(2, |_, _| rng.gen_range(-20.0..20.0));
        let direct = -x[0] * x[0] - x[2] * x[2] + u[0] * x[1] + u[1] * x[2] + 0.1 * x.norm_squared();
        let got = p.phi(&u, &x).unwrap();
        assert!((got - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
    }
}

#[test]
fn phi_is_affine_in_u() {
    let p = problem(DerivativeSource::Analytic);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let x = DVector::from_fn(3, |_, _| rng.gen_range(-5.0..5.0));
        let u1 = DVector::from_fn(2, |_, _| rng.gen_range(-5.0..5.0));
        let u2 = DVector::from_fn(2, |_, _| rng.gen_range(-5.0..5.0));
        let l: f64 = rng.gen_range(-2.0..2.0);
        let mix = &u1 * l + &u2 * (1.0 - l);
        let lhs = p.phi(&mix, &x).unwrap();
        let rhs = l * p.phi(&u1, &x).unwrap() + (1.0 - l) * p.phi(&u2, &x).unwrap();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}

#[test]
fn strong_convexity_on_random_pairs() {
    let p = problem(DerivativeSource::Analytic);
    let mj = p.strong_convexity();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10_000 {
        let (u, x, t) = feasible_point(&p, &mut rng);
        let w = CaseStudy::kappa1(&x) + DVector::from_fn(2, |_, _| rng.gen_range(-5.0..5.0));
        if p.phi_minus_gamma(&w, &x).unwrap() >= 0.0 {
            continue;
        }
        let ju = p.relaxed_cost(&u, &x, t).unwrap();
        let jw = p.relaxed_cost(&w, &x, t).unwrap();
        let d = &w - &u;
        let lower = ju + p.grad_u_relaxed(&u, &x, t).unwrap().dot(&d) + 0.5 * mj * d.norm_squared();
        assert!(jw >= lower - 1e-12 * (1.0 + jw.abs()));
        let eig = p.hess_uu_relaxed(&u, &x, t).unwrap().symmetric_eigenvalues().min();
        assert!(eig >= mj - 1e-12);
    }
}

proptest! {
    #[test]
    fn hessian_dominates_cost_hessian(
        x in prop::array::uniform3(-10.0f64..10.0),
        du in prop::array::uniform2(-3.0f64..3.0),
        t in 0.0f64..6.0,
    ) {
        let p = problem(DerivativeSource::Dual);
        let x = v(&x);
        let u = CaseStudy::kappa1(&x) + v(&du);
        prop_assume!(p.phi_minus_gamma(&u, &x).unwrap() < 0.0);
        let h = p.hess_uu_relaxed(&u, &x, t).unwrap();
        let extra = h - DMatrix::from_diagonal(&v(&[1.0, 3.0]));
        // the barrier contributes a rank-one positive semidefinite term
        prop_assert!(extra.symmetric_eigenvalues().min() >= -1e-12);
    }
}
