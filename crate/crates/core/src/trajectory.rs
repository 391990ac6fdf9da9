use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::integrator::{integrate_ode, IntegratorConfig, StepStats};
use crate::oracle::{solve_ustar, tracking_error, tracking_error_sq, OracleConfig};
use crate::problem::{Barrier, BarrierWeight, Model, RelaxedProblem};
use crate::tracking::{CoupledState, TrackingConfig, TrackingSystem};

/// One recorded sample of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub u_star: Vec<f64>,
    /// `∇ᵤJ̃(u, x, t)`.
    pub grad: Vec<f64>,
    pub err: f64,
    pub err_sq: f64,
    pub phi_minus_gamma: f64,
    pub grad_norm: f64,
    pub cost: f64,
    /// `‖∇ᵤJ̃(u*, x, t)‖` reported by the oracle.
    pub ustar_grad_norm: f64,
    pub oracle_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub time: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    /// Serialized scenario config, when the run came from one.
    pub config: Option<String>,
    pub wall_clock_secs: f64,
    pub stats: StepStats,
    pub state_dim: usize,
    pub input_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<SampleRecord>,
    pub meta: TrajectoryMeta,
    pub failure: Option<RunFailure>,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.t)
    }

    /// The record whose time is closest to `t`.
    pub fn nearest(&self, t: f64) -> Option<&SampleRecord> {
        self.records
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

/// Integrate the closed loop from `(x0, u0)` and fill the oracle columns.
///
/// `u0` must be strictly feasible, `φ(u0, x0) < γ`.
pub fn integrate<M: Model, B: Barrier, W: BarrierWeight>(
    problem: &RelaxedProblem<M, B, W>,
    tracking: &TrackingConfig,
    integ: &IntegratorConfig,
    oracle: &OracleConfig,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
) -> Result<Trajectory> {
    let n = problem.state_dim();
    let m = problem.input_dim();
    ensure_len("x0", n, x0.len())?;
    ensure_len("u0", m, u0.len())?;
    integ.validate()?;
    oracle.validate()?;
    let z0 = problem.phi_minus_gamma(u0, x0)?;
    if !(z0 < 0.0) {
        return Err(Error::Infeasible { phi_minus_gamma: z0 });
    }

    let started = Instant::now();
    let system = TrackingSystem { problem, config: tracking };
    let y0 = CoupledState::new(x0.clone(), u0.clone(), 0.0).pack();
    let sol = integrate_ode(&system, &y0, integ)?;

    let mut traj = Trajectory {
        records: Vec::with_capacity(sol.times.len()),
        meta: TrajectoryMeta {
            config: None,
            wall_clock_secs: 0.0,
            stats: sol.stats,
            state_dim: n,
            input_dim: m,
        },
        failure: None,
    };
    let mut failure = sol.failure;
    let mut warm: Option<DVector<f64>> = None;
    let mut failed_at = None;

    for (&t, y) in sol.times.iter().zip(&sol.states) {
        let s = CoupledState::unpack(y, n, t);
        let record = (|| -> Result<SampleRecord> {
            let p = problem.partials(&s.u, &s.x, t)?;
            let star = solve_ustar(problem, &s.x, t, warm.as_ref(), oracle)?;
            let rec = SampleRecord {
                t,
                x: s.x.as_slice().to_vec(),
                u: s.u.as_slice().to_vec(),
                u_star: star.u.as_slice().to_vec(),
                grad: p.grad.as_slice().to_vec(),
                err: tracking_error(&s.u, &star.u),
                err_sq: tracking_error_sq(&s.u, &star.u),
                phi_minus_gamma: p.phi_minus_gamma,
                grad_norm: p.grad.norm(),
                cost: p.cost,
                ustar_grad_norm: star.grad_norm,
                oracle_iterations: star.iterations,
            };
            warm = Some(star.u);
            Ok(rec)
        })();
        match record {
            Ok(r) => traj.records.push(r),
            Err(e) => {
                failure = Some(e);
                failed_at = Some(t);
                break;
            }
        }
    }
    traj.meta.wall_clock_secs = started.elapsed().as_secs_f64();

    match failure {
        None => Ok(traj),
        Some(e) => {
            let time = match &e {
                Error::Integration { t, .. } => *t,
                _ => failed_at.unwrap_or(0.0),
            };
            traj.failure = Some(RunFailure {
                time,
                reason: e.to_string(),
            });
            Err(Error::RunFailed {
                source: Box::new(e),
                partial: Box::new(traj),
            })
        }
    }
}
