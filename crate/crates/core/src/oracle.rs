//! Ground-truth minimizer `u*(x, t) = argmin_u J̃(u, x, t)`.
//!
//! [`solve_ustar`] runs damped Newton from a strictly feasible start and keeps
//! every iterate inside the barrier domain. [`brute_force_ustar`] is an
//! independent lattice search for two-input problems, used to cross-check it.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::problem::{Barrier, BarrierWeight, Model, RelaxedProblem};

const MAX_BACKTRACKS: usize = 80;
const ARMIJO: f64 = 1e-4;
/// Refinement rounds after the initial lattice.
const GRID_REFINEMENTS: usize = 4;
const GRID_SHRINK: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub newton_tol: f64,
    pub max_iters: usize,
    pub backtrack_ratio: f64,
    pub grid_points: usize,
    /// `None` means `max(1, ‖κ(x)‖)`.
    pub grid_half_width: Option<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_iters: 100,
            backtrack_ratio: 0.5,
            grid_points: 41,
            grid_half_width: None,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol.is_finite() && self.newton_tol > 0.0) {
            return Err(Error::validation("newton_tol", format!("must be > 0, got {}", self.newton_tol)));
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return Err(Error::validation(
                "backtrack_ratio",
                format!("must lie in (0, 1), got {}", self.backtrack_ratio),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::validation("max_iters", "must be at least 1"));
        }
        if self.grid_points < 3 {
            return Err(Error::validation("grid_points", format!("must be >= 3, got {}", self.grid_points)));
        }
        if let Some(w) = self.grid_half_width {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::validation("grid_half_width", format!("must be > 0, got {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimizer {
    pub u: DVector<f64>,
    pub iterations: usize,
    /// `‖∇ᵤJ̃(u, x, t)‖` at the returned point.
    pub grad_norm: f64,
}

pub fn solve_ustar<M: Model, B: Barrier, W: BarrierWeight>(
    problem: &RelaxedProblem<M, B, W>,
    x: &DVector<f64>,
    t: f64,
    warm_start: Option<&DVector<f64>>,
    cfg: &OracleConfig,
) -> Result<Minimizer> {
    ensure_len("x", problem.state_dim(), x.len())?;
    // A warm start that is no longer feasible at this x falls back to κ(x).
    let mut u = match warm_start {
        Some(w) if problem.phi_minus_gamma(w, x)? < 0.0 => w.clone(),
        _ => problem.feedback(x),
    };
    let z = problem.phi_minus_gamma(&u, x)?;
    if !(z < 0.0) {
        return Err(Error::Oracle(format!("start point infeasible (phi - gamma = {z})")));
    }

    for it in 0..=cfg.max_iters {
        let (g, h) = problem.grad_hess(&u, x, t)?;
        let gn = g.norm();
        if gn <= cfg.newton_tol {
            return Ok(Minimizer {
                u,
                iterations: it,
                grad_norm: gn,
            });
        }
        if it == cfg.max_iters {
            return Err(Error::Oracle(format!(
                "no convergence after {} Newton iterations (|grad| = {gn:e}) at t = {t}",
                cfg.max_iters
            )));
        }
        let chol = h.cholesky().ok_or(Error::NotPositiveDefinite {
            what: "hess_uu of the relaxed cost",
        })?;
        let dir = -chol.solve(&g);
        let slope = g.dot(&dir);
        let f0 = problem.relaxed_cost(&u, x, t)?;

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let cand = &u + &dir * step;
            let fc = problem.relaxed_cost(&cand, x, t)?;
            if fc.is_finite() {
                let sufficient = fc <= f0 + ARMIJO * step * slope;
                // below the resolution of f, the cost can no longer certify progress
                let flat = (fc - f0).abs() <= 1e-13 * f0.abs().max(1.0);
                if sufficient || flat {
                    accepted = Some(cand);
                    break;
                }
            }
            step *= cfg.backtrack_ratio;
        }
        u = accepted.ok_or_else(|| {
            Error::Oracle(format!("line search failed at t = {t} (|grad| = {gn:e})"))
        })?;
    }
    unreachable!("loop returns on its last iteration")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimizer {
    pub u: DVector<f64>,
    /// Lattice spacing of the final refinement round.
    pub cell: f64,
}

/// Lattice search around `κ(x)`, shrinking ×0.1 around the incumbent after
/// each round. Two-input problems only.
pub fn brute_force_ustar<M: Model, B: Barrier, W: BarrierWeight>(
    problem: &RelaxedProblem<M, B, W>,
    x: &DVector<f64>,
    t: f64,
    cfg: &OracleConfig,
) -> Result<GridMinimizer> {
    if problem.input_dim() != 2 {
        return Err(Error::Oracle(format!(
            "grid search needs exactly 2 inputs, problem has {}",
            problem.input_dim()
        )));
    }
    ensure_len("x", problem.state_dim(), x.len())?;
    let n = cfg.grid_points.max(3);
    let kappa = problem.feedback(x);
    let mut half = cfg.grid_half_width.unwrap_or_else(|| kappa.norm().max(1.0));
    let mut center = kappa;
    let mut cell = 2.0 * half / (n - 1) as f64;

    for round in 0..=GRID_REFINEMENTS {
        cell = 2.0 * half / (n - 1) as f64;
        let mut best: Option<(f64, DVector<f64>)> = None;
        for i in 0..n {
            for j in 0..n {
                let u = DVector::from_vec(vec![
                    center[0] - half + cell * i as f64,
                    center[1] - half + cell * j as f64,
                ]);
                let c = problem.relaxed_cost(&u, x, t)?;
                if c.is_finite() && best.as_ref().is_none_or(|(b, _)| c < *b) {
                    best = Some((c, u));
                }
            }
        }
        match best {
            Some((_, u)) => center = u,
            None if round == 0 => {
                return Err(Error::Oracle("every lattice point is infeasible".into()));
            }
            None => break,
        }
        half *= GRID_SHRINK;
    }
    Ok(GridMinimizer { u: center, cell })
}

/// `‖u − u*‖`.
pub fn tracking_error(u: &DVector<f64>, u_star: &DVector<f64>) -> f64 {
    (u - u_star).norm()
}

/// `‖u − u*‖²`.
pub fn tracking_error_sq(u: &DVector<f64>, u_star: &DVector<f64>) -> f64 {
    (u - u_star).norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracking_error_examples() {
        let z = DVector::from_vec(vec![0.0, 0.0]);
        let a = DVector::from_vec(vec![1.5, -2.0]);
        assert_eq!(tracking_error(&a, &a), 0.0);
        assert_eq!(tracking_error(&DVector::from_vec(vec![1.0, 0.0]), &z), 1.0);
        assert_eq!(tracking_error(&DVector::from_vec(vec![3.0, 4.0]), &z), 5.0);
        assert_eq!(tracking_error_sq(&DVector::from_vec(vec![3.0, 4.0]), &z), 25.0);
    }

    #[test]
    fn config_validation() {
        let ok = OracleConfig::default();
        assert!(ok.validate().is_ok());
        assert!(OracleConfig { newton_tol: 0.0, ..ok }.validate().is_err());
        assert!(OracleConfig { backtrack_ratio: 1.0, ..ok }.validate().is_err());
        assert!(OracleConfig { max_iters: 0, ..ok }.validate().is_err());
        assert!(OracleConfig { grid_half_width: Some(-1.0), ..ok }.validate().is_err());
    }
}
