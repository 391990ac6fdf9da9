//! Explicit Runge–Kutta integration with a feasibility guard.
//!
//! Every stage state and every proposed endpoint is checked against the
//! system's [`OdeSystem::margin`] before the right-hand side is evaluated
//! there; a step that would leave the feasible region is rejected and the
//! step size halved. Samples are recorded on a uniform grid that the steps
//! land on exactly.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest step size the guard may shrink to before giving up.
pub const MIN_STEP: f64 = 1e-15;

pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &DVector<f64>) -> Result<DVector<f64>>;

    /// Feasibility margin at `(t, y)`; the right-hand side is only defined
    /// where it is negative. Unconstrained systems keep the default.
    fn margin(&self, _t: f64, _y: &DVector<f64>) -> f64 {
        f64::NEG_INFINITY
    }

    /// States with `margin >= -guard_tolerance()` are treated as infeasible.
    fn guard_tolerance(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with a fixed step.
    Rk4,
    /// Dormand–Prince 5(4) with embedded error control.
    Rk45,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step (RK4) or initial step (RK45), seconds.
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    pub sample_dt: f64,
    /// Consecutive rejections of one step before the run is abandoned.
    pub max_step_rejections: u32,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            dt: 1e-3,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            t_end: 6.0,
            sample_dt: 1e-2,
            max_step_rejections: 60,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(name, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("sample_dt", self.sample_dt)?;
        positive("t_end", self.t_end)?;
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        if self.dt > self.sample_dt {
            return Err(Error::validation(
                "dt",
                format!("dt = {} exceeds sample_dt = {}", self.dt, self.sample_dt),
            ));
        }
        if self.sample_dt > self.t_end {
            return Err(Error::validation(
                "sample_dt",
                format!("sample_dt = {} exceeds t_end = {}", self.sample_dt, self.t_end),
            ));
        }
        Ok(())
    }

    /// Number of recorded samples, `floor(t_end / sample_dt) + 1`.
    pub fn sample_count(&self) -> usize {
        (self.t_end / self.sample_dt + 1e-9).floor() as usize + 1
    }

    pub fn sample_time(&self, k: usize) -> f64 {
        k as f64 * self.sample_dt
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: u64,
    /// Steps rejected because a stage or endpoint left the feasible region.
    pub guard_rejections: u64,
    /// Steps rejected by the embedded error estimate (RK45 only).
    pub error_rejections: u64,
    pub rhs_evaluations: u64,
    pub smallest_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// The advanced state if accepted, otherwise the unchanged input state.
    pub state: DVector<f64>,
    pub accepted: bool,
    pub suggested_h: f64,
    pub guard_tripped: bool,
    pub rhs_evaluations: u32,
}

struct Tableau {
    c: &'static [f64],
    a: &'static [&'static [f64]],
    b: &'static [f64],
    /// Weights of the embedded lower-order solution, if any.
    b_low: Option<&'static [f64]>,
}

const RK4: Tableau = Tableau {
    c: &[0.0, 0.5, 0.5, 1.0],
    a: &[&[], &[0.5], &[0.0, 0.5], &[0.0, 0.0, 1.0]],
    b: &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
    b_low: None,
};

const DOPRI5: Tableau = Tableau {
    c: &[0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0],
    a: &[
        &[],
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
        &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ],
    b: &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0],
    b_low: Some(&[
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ]),
};

fn is_guarded_out<S: OdeSystem + ?Sized>(sys: &S, t: f64, y: &DVector<f64>) -> bool {
    let m = sys.margin(t, y);
    !(m < -sys.guard_tolerance()) || y.iter().any(|v| !v.is_finite())
}

/// Attempt one step of size `h` from `(t, y)`.
pub fn step_with_feasibility_guard<S: OdeSystem + ?Sized>(
    sys: &S,
    method: Method,
    t: f64,
    y: &DVector<f64>,
    h: f64,
    cfg: &IntegratorConfig,
) -> Result<StepOutcome> {
    if !(h >= MIN_STEP) {
        return Err(Error::Integration {
            t,
            reason: format!("step size {h:e} underflowed"),
            last_state: y.as_slice().to_vec(),
        });
    }
    let tab = match method {
        Method::Rk4 => &RK4,
        Method::Rk45 => &DOPRI5,
    };
    let reject = |evals: u32| StepOutcome {
        state: y.clone(),
        accepted: false,
        suggested_h: 0.5 * h,
        guard_tripped: true,
        rhs_evaluations: evals,
    };

    let mut ks: Vec<DVector<f64>> = Vec::with_capacity(tab.c.len());
    for (i, &ci) in tab.c.iter().enumerate() {
        let mut yi = y.clone();
        for (j, &aij) in tab.a[i].iter().enumerate() {
            if aij != 0.0 {
                yi.axpy(h * aij, &ks[j], 1.0);
            }
        }
        let ti = t + ci * h;
        if is_guarded_out(sys, ti, &yi) {
            return Ok(reject(i as u32));
        }
        match sys.rhs(ti, &yi) {
            Ok(k) => ks.push(k),
            Err(Error::Infeasible { .. }) => return Ok(reject(i as u32 + 1)),
            Err(e) => return Err(e),
        }
    }
    let evals = ks.len() as u32;

    let mut next = y.clone();
    for (k, &bi) in ks.iter().zip(tab.b) {
        if bi != 0.0 {
            next.axpy(h * bi, k, 1.0);
        }
    }
    if is_guarded_out(sys, t + h, &next) {
        return Ok(reject(evals));
    }

    let Some(b_low) = tab.b_low else {
        return Ok(StepOutcome {
            state: next,
            accepted: true,
            suggested_h: h,
            guard_tripped: false,
            rhs_evaluations: evals,
        });
    };

    let mut err_sq = 0.0;
    for idx in 0..y.len() {
        let diff: f64 = ks
            .iter()
            .zip(tab.b.iter().zip(b_low))
            .map(|(k, (bh, bl))| h * (bh - bl) * k[idx])
            .sum();
        let scale = cfg.abs_tol + cfg.rel_tol * y[idx].abs().max(next[idx].abs());
        err_sq += (diff / scale).powi(2);
    }
    let err = (err_sq / y.len().max(1) as f64).sqrt();
    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
    if err <= 1.0 {
        Ok(StepOutcome {
            state: next,
            accepted: true,
            suggested_h: h * factor,
            guard_tripped: false,
            rhs_evaluations: evals,
        })
    } else {
        Ok(StepOutcome {
            state: y.clone(),
            accepted: false,
            suggested_h: h * factor.min(0.9),
            guard_tripped: false,
            rhs_evaluations: evals,
        })
    }
}

/// Uniformly sampled solution. On failure the samples recorded so far are kept.
#[derive(Debug)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub stats: StepStats,
    pub failure: Option<Error>,
}

pub fn integrate_ode<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<OdeSolution> {
    cfg.validate()?;
    if y0.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: sys.dim(),
            got: y0.len(),
        });
    }
    if is_guarded_out(sys, 0.0, y0) {
        return Err(Error::Infeasible {
            phi_minus_gamma: sys.margin(0.0, y0),
        });
    }

    let n = cfg.sample_count();
    let mut out = OdeSolution {
        times: Vec::with_capacity(n),
        states: Vec::with_capacity(n),
        stats: StepStats {
            smallest_step: f64::INFINITY,
            ..StepStats::default()
        },
        failure: None,
    };
    let mut t = 0.0;
    let mut y = y0.clone();
    let mut h = cfg.dt;
    out.times.push(t);
    out.states.push(y.clone());

    'samples: for k in 1..n {
        let target = cfg.sample_time(k);
        let mut rejections = 0u32;
        while t < target {
            let remaining = target - t;
            let last = h >= remaining * (1.0 - 1e-9);
            let h_try = if last { remaining } else { h };
            let step = match step_with_feasibility_guard(sys, cfg.method, t, &y, h_try, cfg) {
                Ok(s) => s,
                Err(e) => {
                    out.failure = Some(e);
                    break 'samples;
                }
            };
            out.stats.rhs_evaluations += u64::from(step.rhs_evaluations);
            if step.accepted {
                out.stats.accepted += 1;
                out.stats.smallest_step = out.stats.smallest_step.min(h_try);
                rejections = 0;
                y = step.state;
                t = if last { target } else { t + h_try };
                h = match cfg.method {
                    Method::Rk4 => cfg.dt,
                    Method::Rk45 => step.suggested_h.min(cfg.sample_dt),
                };
            } else {
                if step.guard_tripped {
                    out.stats.guard_rejections += 1;
                } else {
                    out.stats.error_rejections += 1;
                }
                rejections += 1;
                if rejections > cfg.max_step_rejections {
                    out.failure = Some(Error::Integration {
                        t,
                        reason: format!("{rejections} consecutive step rejections"),
                        last_state: y.as_slice().to_vec(),
                    });
                    break 'samples;
                }
                h = step.suggested_h;
            }
        }
        out.times.push(target);
        out.states.push(y.clone());
    }
    Ok(out)
}
