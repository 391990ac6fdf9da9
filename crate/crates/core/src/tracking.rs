//! Controller dynamics that track the time-varying minimizer of `J̃`.
//!
//! Both laws pick `u̇` so that the gradient `∇ᵤJ̃` along the closed loop obeys
//! a prescribed ODE:
//!
//! ```text
//! ∇ᵤᵤJ̃·u̇ + ∇ᵤₓJ̃·ẋ + ∇ᵤₜJ̃ = −Ψ(∇ᵤJ̃)     fixed-time (FC)
//! ∇ᵤᵤJ̃·u̇ + ∇ᵤₓJ̃·ẋ + ∇ᵤₜJ̃ = −A·∇ᵤJ̃      exponential (EC)
//! ```
//!
//! which is solved for `u̇` with a Cholesky factorization of `∇ᵤᵤJ̃`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::fixed_time::{closed_form_solution, psi_vec_regularized, SettlingTime, DEFAULT_DEADBAND};
use crate::integrator::OdeSystem;
use crate::problem::{Barrier, BarrierWeight, Model, Partials, RelaxedProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawKind {
    Fc,
    Ec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrackingConfig {
    FixedTime { tau: SettlingTime, deadband: f64 },
    Exponential { gain: DMatrix<f64> },
}

impl TrackingConfig {
    pub fn fixed_time(tau: SettlingTime) -> Self {
        TrackingConfig::FixedTime {
            tau,
            deadband: DEFAULT_DEADBAND,
        }
    }

    pub fn fixed_time_with_deadband(tau: SettlingTime, deadband: f64) -> Result<Self> {
        if !(deadband.is_finite() && deadband > 0.0) {
            return Err(Error::validation(
                "deadband_eps",
                format!("must be finite and > 0, got {deadband}"),
            ));
        }
        Ok(TrackingConfig::FixedTime { tau, deadband })
    }

    /// `gain` must be symmetric positive definite.
    pub fn exponential(gain: DMatrix<f64>) -> Result<Self> {
        if !gain.is_square() {
            return Err(Error::validation("ec_gain", "must be square"));
        }
        let asym = (&gain - gain.transpose()).amax();
        if asym > 1e-12 * gain.amax().max(1.0) {
            return Err(Error::validation("ec_gain", "must be symmetric"));
        }
        let smallest = gain.clone().symmetric_eigenvalues().min();
        if !(smallest > 0.0) {
            return Err(Error::validation(
                "ec_gain",
                format!("must be positive definite, smallest eigenvalue {smallest}"),
            ));
        }
        Ok(TrackingConfig::Exponential { gain })
    }

    pub fn kind(&self) -> LawKind {
        match self {
            TrackingConfig::FixedTime { .. } => LawKind::Fc,
            TrackingConfig::Exponential { .. } => LawKind::Ec,
        }
    }

    /// `Ψ_ε(∇ᵤJ̃)` or `A·∇ᵤJ̃`.
    pub fn correction(&self, grad: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            TrackingConfig::FixedTime { tau, deadband } => psi_vec_regularized(grad, *tau, *deadband),
            TrackingConfig::Exponential { gain } => {
                ensure_len("ec_gain", grad.len(), gain.nrows())?;
                Ok(gain * grad)
            }
        }
    }
}

/// Plant state, controller state and time.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub t: f64,
}

impl CoupledState {
    pub fn new(x: DVector<f64>, u: DVector<f64>, t: f64) -> Self {
        Self { x, u, t }
    }

    /// Stacked `(x; u)`.
    pub fn pack(&self) -> DVector<f64> {
        DVector::from_iterator(self.x.len() + self.u.len(), self.x.iter().chain(self.u.iter()).copied())
    }

    pub fn unpack(y: &DVector<f64>, n: usize, t: f64) -> Self {
        Self {
            x: y.rows(0, n).into_owned(),
            u: y.rows(n, y.len() - n).into_owned(),
            t,
        }
    }
}

fn solve_for_udot(p: &Partials, correction: DVector<f64>, xdot: &DVector<f64>) -> Result<DVector<f64>> {
    let rhs = correction + &p.mixed_ut + &p.mixed_ux * xdot;
    let chol = p
        .hess
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { what: "hess_uu of the relaxed cost" })?;
    Ok(-chol.solve(&rhs))
}

/// `u̇` for a prescribed plant rate `xdot`, which need not be `f(x) + g(x)u`.
pub fn udot_with_state_rate<M: Model, B: Barrier, W: BarrierWeight>(
    problem: &RelaxedProblem<M, B, W>,
    config: &TrackingConfig,
    s: &CoupledState,
    xdot: &DVector<f64>,
) -> Result<DVector<f64>> {
    ensure_len("xdot", problem.state_dim(), xdot.len())?;
    let p = problem.partials(&s.u, &s.x, s.t)?;
    let corr = config.correction(&p.grad)?;
    solve_for_udot(&p, corr, xdot)
}

pub fn law_udot<M: Model, B: Barrier, W: BarrierWeight>(
    problem: &RelaxedProblem<M, B, W>,
    config: &TrackingConfig,
    s: &CoupledState,
) -> Result<DVector<f64>> {
    let xdot = problem.state_rate(&s.u, &s.x);
    udot_with_state_rate(problem, config, s, &xdot)
}

pub fn fc_udot<M: Model, B: Barrier, W: BarrierWeight>(
    problem: &RelaxedProblem<M, B, W>,
    tau: SettlingTime,
    deadband: f64,
    s: &CoupledState,
) -> Result<DVector<f64>> {
    law_udot(problem, &TrackingConfig::FixedTime { tau, deadband }, s)
}

pub fn ec_udot<M: Model, B: Barrier, W: BarrierWeight>(
    problem: &RelaxedProblem<M, B, W>,
    gain: &DMatrix<f64>,
    s: &CoupledState,
) -> Result<DVector<f64>> {
    law_udot(problem, &TrackingConfig::Exponential { gain: gain.clone() }, s)
}

/// `(f(x) + g(x)u ; u̇)`.
pub fn coupled_rhs<M: Model, B: Barrier, W: BarrierWeight>(
    problem: &RelaxedProblem<M, B, W>,
    config: &TrackingConfig,
    s: &CoupledState,
) -> Result<DVector<f64>> {
    ensure_len("x", problem.state_dim(), s.x.len())?;
    ensure_len("u", problem.input_dim(), s.u.len())?;
    let xdot = problem.state_rate(&s.u, &s.x);
    let udot = udot_with_state_rate(problem, config, s, &xdot)?;
    Ok(DVector::from_iterator(
        xdot.len() + udot.len(),
        xdot.iter().chain(udot.iter()).copied(),
    ))
}

/// Predicted `∇ᵤJ̃` along an FC trajectory started with gradient `zeta0`.
pub fn gradient_trajectory_closed_form(zeta0: &DVector<f64>, tau: SettlingTime, t: f64) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(zeta0.len());
    for (o, &z) in out.iter_mut().zip(zeta0.iter()) {
        *o = closed_form_solution(z, tau, t)?;
    }
    Ok(out)
}

/// The closed loop as an ODE in `(x; u)`, guarded by `φ − γ < 0`.
pub struct TrackingSystem<'a, M, B, W> {
    pub problem: &'a RelaxedProblem<M, B, W>,
    pub config: &'a TrackingConfig,
}

impl<M: Model, B: Barrier, W: BarrierWeight> OdeSystem for TrackingSystem<'_, M, B, W> {
    fn dim(&self) -> usize {
        self.problem.state_dim() + self.problem.input_dim()
    }

    fn rhs(&self, t: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        let s = CoupledState::unpack(y, self.problem.state_dim(), t);
        coupled_rhs(self.problem, self.config, &s)
    }

    fn margin(&self, t: f64, y: &DVector<f64>) -> f64 {
        let s = CoupledState::unpack(y, self.problem.state_dim(), t);
        self.problem.phi_minus_gamma(&s.u, &s.x).unwrap_or(f64::NAN)
    }

    fn guard_tolerance(&self) -> f64 {
        1e-12 * self.problem.gamma().abs()
    }
}
