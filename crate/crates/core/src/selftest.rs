//! Quick built-in checks behind `fixtrack selftest`: the fixed-time closed
//! form against integration, the settling-time bound, and the derivative
//! routes of the case study against each other and finite differences.

use nalgebra::{DMatrix, DVector};

use crate::fixed_time::{closed_form_solution, settling_time_of, FixedTimeOde, SettlingTime};
use crate::integrator::{integrate_ode, IntegratorConfig};
use crate::oracle::{brute_force_ustar, solve_ustar, OracleConfig};
use crate::problem::{DerivativeSource, RelaxedProblem};
use crate::scenarios::CaseStudy;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

pub fn run() -> Vec<Check> {
    vec![
        closed_form_agreement(),
        settling_supremum(),
        derivative_agreement(),
        oracle_agreement(),
    ]
}

fn closed_form_agreement() -> Check {
    let mut worst = 0.0f64;
    let mut worst_end = 0.0f64;
    for tau in [1.0, 3.0] {
        let tau_s = SettlingTime::new(tau).expect("positive");
        for z0 in [-10.0, -1.0, 1.0, 10.0] {
            let cfg = IntegratorConfig {
                dt: tau / 3000.0,
                sample_dt: tau / 100.0,
                t_end: tau,
                ..IntegratorConfig::default()
            };
            let sol = match integrate_ode(&FixedTimeOde::scalar(tau_s), &DVector::from_element(1, z0), &cfg) {
                Ok(s) => s,
                Err(e) => return check("fixed-time closed form", false, e.to_string()),
            };
            for (&t, y) in sol.times.iter().zip(&sol.states) {
                let exact = closed_form_solution(z0, tau_s, t).unwrap_or(f64::NAN);
                worst = worst.max((y[0] - exact).abs());
            }
            worst_end = worst_end.max(sol.states.last().map_or(f64::NAN, |y| y[0].abs()));
        }
    }
    check(
        "fixed-time closed form",
        worst <= 1e-6 && worst_end <= 1e-6,
        format!("max |z - z_exact| = {worst:.3e}, max |z(tau)| = {worst_end:.3e}"),
    )
}

fn settling_supremum() -> Check {
    let tau = SettlingTime::new(3.0).expect("positive");
    let below = [0.0, 1e-6, 1.0, 1e3, 1e12, 1e16]
        .iter()
        .all(|&z| settling_time_of(z, tau) < 3.0 && settling_time_of(-z, tau) < 3.0);
    let near = settling_time_of(1e12, tau);
    check(
        "settling-time supremum",
        below && near > 0.999 * 3.0,
        format!("T(1e12) = {near}"),
    )
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-12)
}

fn sample_points() -> Vec<(DVector<f64>, DVector<f64>, f64)> {
    let mut pts = Vec::new();
    for s in [1.0, 0.4, 0.05] {
        let x = DVector::from_vec(vec![-9.0 * s, -7.0 * s, 5.0 * s]);
        for a in [1.0, 0.3, -0.2] {
            for t in [0.0, 1.7] {
                pts.push((x.clone(), CaseStudy::kappa1(&x) * a, t));
            }
        }
    }
    pts
}

fn derivative_agreement() -> Check {
    let analytic = RelaxedProblem::with_defaults(CaseStudy::default(), 0.01, 1.0)
        .expect("valid")
        .with_derivatives(DerivativeSource::Analytic);
    let dual = analytic.clone().with_derivatives(DerivativeSource::Dual);
    let mut worst_dual = 0.0f64;
    let mut worst_fd = 0.0f64;
    for (x, u, t) in sample_points() {
        let (Ok(a), Ok(d)) = (analytic.partials(&u, &x, t), dual.partials(&u, &x, t)) else {
            continue;
        };
        let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        worst_dual = worst_dual
            .max(rel(&col(&a.grad), &col(&d.grad)))
            .max(rel(&a.hess, &d.hess))
            .max(rel(&a.mixed_ux, &d.mixed_ux))
            .max(rel(&col(&a.mixed_ut), &col(&d.mixed_ut)));

        let h = 1e-5;
        let mut fd = DVector::zeros(u.len());
        for i in 0..u.len() {
            let mut up = u.clone();
            let mut um = u.clone();
            up[i] += h;
            um[i] -= h;
            let (Ok(cp), Ok(cm)) = (analytic.relaxed_cost(&up, &x, t), analytic.relaxed_cost(&um, &x, t)) else {
                continue;
            };
            fd[i] = (cp - cm) / (2.0 * h);
        }
        worst_fd = worst_fd.max(rel(&col(&a.grad), &col(&fd)));
    }
    check(
        "relaxed-cost derivatives",
        worst_dual <= 1e-10 && worst_fd <= 1e-5,
        format!("analytic vs dual {worst_dual:.2e}, gradient vs finite differences {worst_fd:.2e}"),
    )
}

fn oracle_agreement() -> Check {
    let p = RelaxedProblem::with_defaults(CaseStudy::default(), 0.01, 1.0)
        .expect("valid")
        .with_derivatives(DerivativeSource::Analytic);
    let cfg = OracleConfig::default();
    let mut worst = 0.0f64;
    for (x, _, t) in sample_points().into_iter().step_by(3) {
        let newton = solve_ustar(&p, &x, t, None, &cfg);
        let grid = brute_force_ustar(&p, &x, t, &cfg);
        match (newton, grid) {
            (Ok(n), Ok(g)) => worst = worst.max((n.u - g.u).norm() / g.cell),
            (Err(e), _) | (_, Err(e)) => return check("oracle agreement", false, e.to_string()),
        }
    }
    check(
        "oracle agreement",
        worst <= 2.0,
        format!("max |newton - grid| = {worst:.2} lattice cells"),
    )
}
