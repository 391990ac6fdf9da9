//! Scenario configuration files.
//!
//! A config is a flat TOML document; only `scenario` is required. See the
//! repository README for the full key list. Every value is validated on load,
//! including strict feasibility of the resolved initial control.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_time::{SettlingTime, DEFAULT_DEADBAND};
use crate::integrator::{IntegratorConfig, Method};
use crate::oracle::OracleConfig;
use crate::problem::{DerivativeSource, RelaxedProblem};
use crate::scenarios::{ScenarioKey, ScenarioModel};
use crate::tracking::{LawKind, TrackingConfig};

/// Gradient norm below which a run counts as settled.
pub const DEFAULT_TOL_SETTLE: f64 = 1e-4;

/// How the initial controller state is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum U0Mode {
    /// `u(0) = κ(x₀)`.
    Kappa,
    /// `u(0) = factor·κ(x₀)`.
    Scaled(f64),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKey,
    pub law: LawKind,
    pub tau: SettlingTime,
    pub gamma: f64,
    /// `μ(t) = exp(−mu_rate·t)`.
    pub mu_rate: f64,
    pub x0: Vec<f64>,
    pub u0_mode: U0Mode,
    pub ec_gain_diag: Vec<f64>,
    pub deadband_eps: f64,
    pub derivatives: DerivativeSource,
    pub integrator: IntegratorConfig,
    pub oracle: OracleConfig,
    pub tol_settle: f64,
    pub output_dir: Option<PathBuf>,
    pub run_name: String,
}

/// On-disk form: every key but `scenario` optional.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    run_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    law: Option<LawKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u0_mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u0_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ec_gain_diag: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deadband_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    derivatives: Option<DerivativeSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tol_settle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    abs_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_step_rejections: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    newton_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    backtrack_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_half_width: Option<f64>,
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_config_str(&text)
}

pub fn load_config_str(text: &str) -> Result<ScenarioConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    ScenarioConfig::from_raw(raw)
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::validation(field, format!("must be finite and > 0, got {v}")))
    }
}

impl ScenarioConfig {
    /// All defaults for a registered scenario.
    pub fn defaults(scenario: ScenarioKey) -> Self {
        let m = scenario.model();
        let inputs = crate::problem::Plant::input_dim(&m);
        Self {
            scenario,
            law: LawKind::Fc,
            tau: SettlingTime::new(3.0).expect("positive"),
            gamma: 0.01,
            mu_rate: 1.0,
            x0: scenario.default_x0().as_slice().to_vec(),
            u0_mode: U0Mode::Kappa,
            ec_gain_diag: vec![1.0; inputs],
            deadband_eps: DEFAULT_DEADBAND,
            derivatives: DerivativeSource::Analytic,
            integrator: IntegratorConfig::default(),
            oracle: OracleConfig::default(),
            tol_settle: DEFAULT_TOL_SETTLE,
            output_dir: None,
            run_name: "run".to_string(),
        }
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let scenario: ScenarioKey = raw.scenario.parse()?;
        let d = Self::defaults(scenario);
        let u0_mode = match raw.u0_mode.as_deref() {
            None if raw.u0.is_some() => U0Mode::Explicit(raw.u0.clone().unwrap_or_default()),
            None | Some("kappa") => U0Mode::Kappa,
            Some("scaled") => U0Mode::Scaled(
                raw.u0_factor
                    .ok_or_else(|| Error::validation("u0_factor", "required when u0_mode = \"scaled\""))?,
            ),
            Some("explicit") => U0Mode::Explicit(
                raw.u0
                    .clone()
                    .ok_or_else(|| Error::validation("u0", "required when u0_mode = \"explicit\""))?,
            ),
            Some(other) => {
                return Err(Error::validation(
                    "u0_mode",
                    format!("expected kappa, scaled or explicit, got {other:?}"),
                ))
            }
        };
        if raw.u0_factor.is_some() && !matches!(u0_mode, U0Mode::Scaled(_)) {
            return Err(Error::validation("u0_factor", "only valid with u0_mode = \"scaled\""));
        }
        if raw.u0.is_some() && !matches!(u0_mode, U0Mode::Explicit(_)) {
            return Err(Error::validation("u0", "only valid with u0_mode = \"explicit\""));
        }

        let cfg = Self {
            scenario,
            law: raw.law.unwrap_or(d.law),
            tau: SettlingTime::new(raw.tau.unwrap_or(d.tau.seconds()))?,
            gamma: raw.gamma.unwrap_or(d.gamma),
            mu_rate: raw.mu_rate.unwrap_or(d.mu_rate),
            x0: raw.x0.unwrap_or(d.x0),
            u0_mode,
            ec_gain_diag: raw.ec_gain_diag.unwrap_or(d.ec_gain_diag),
            deadband_eps: raw.deadband_eps.unwrap_or(d.deadband_eps),
            derivatives: raw.derivatives.unwrap_or(d.derivatives),
            integrator: IntegratorConfig {
                method: raw.method.unwrap_or(d.integrator.method),
                dt: raw.dt.unwrap_or(d.integrator.dt),
                rel_tol: raw.rel_tol.unwrap_or(d.integrator.rel_tol),
                abs_tol: raw.abs_tol.unwrap_or(d.integrator.abs_tol),
                t_end: raw.t_end.unwrap_or(d.integrator.t_end),
                sample_dt: raw.sample_dt.unwrap_or(d.integrator.sample_dt),
                max_step_rejections: raw.max_step_rejections.unwrap_or(d.integrator.max_step_rejections),
            },
            oracle: OracleConfig {
                newton_tol: raw.newton_tol.unwrap_or(d.oracle.newton_tol),
                max_iters: raw.max_iters.unwrap_or(d.oracle.max_iters),
                backtrack_ratio: raw.backtrack_ratio.unwrap_or(d.oracle.backtrack_ratio),
                grid_points: raw.grid_points.unwrap_or(d.oracle.grid_points),
                grid_half_width: raw.grid_half_width.or(d.oracle.grid_half_width),
            },
            tol_settle: raw.tol_settle.unwrap_or(d.tol_settle),
            output_dir: raw.output_dir,
            run_name: raw.run_name.unwrap_or(d.run_name),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        positive("gamma", self.gamma)?;
        positive("mu_rate", self.mu_rate)?;
        positive("deadband_eps", self.deadband_eps)?;
        positive("tol_settle", self.tol_settle)?;
        self.integrator.validate()?;
        self.oracle.validate()?;
        if self.run_name.is_empty() || self.run_name.contains(['/', '\\']) {
            return Err(Error::validation("run_name", "must be a non-empty file stem"));
        }
        let model = self.scenario.model();
        let n = crate::problem::Plant::state_dim(&model);
        let m = crate::problem::Plant::input_dim(&model);
        if self.x0.len() != n {
            return Err(Error::validation("x0", format!("expected {n} entries, got {}", self.x0.len())));
        }
        if let Some(v) = self.x0.iter().find(|v| !v.is_finite()) {
            return Err(Error::validation("x0", format!("non-finite entry {v}")));
        }
        if self.ec_gain_diag.len() != m {
            return Err(Error::validation(
                "ec_gain_diag",
                format!("expected {m} entries, got {}", self.ec_gain_diag.len()),
            ));
        }
        for &a in &self.ec_gain_diag {
            positive("ec_gain_diag", a)?;
        }
        match &self.u0_mode {
            U0Mode::Kappa => {}
            U0Mode::Scaled(f) if f.is_finite() => {}
            U0Mode::Scaled(f) => return Err(Error::validation("u0_factor", format!("non-finite {f}"))),
            U0Mode::Explicit(u) if u.len() != m => {
                return Err(Error::validation("u0", format!("expected {m} entries, got {}", u.len())))
            }
            U0Mode::Explicit(u) => {
                if let Some(v) = u.iter().find(|v| !v.is_finite()) {
                    return Err(Error::validation("u0", format!("non-finite entry {v}")));
                }
            }
        }
        let problem = self.problem()?;
        let z = self.initial_margin(&problem)?;
        if !(z < 0.0) {
            return Err(Error::validation(
                "u0",
                format!("initial control is not strictly feasible: phi(u0, x0) - gamma = {z}"),
            ));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<RelaxedProblem<ScenarioModel>> {
        Ok(RelaxedProblem::with_defaults(self.scenario.model(), self.gamma, self.mu_rate)?
            .with_derivatives(self.derivatives))
    }

    pub fn x0_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x0)
    }

    pub fn resolve_u0(&self, problem: &RelaxedProblem<ScenarioModel>) -> DVector<f64> {
        let x0 = self.x0_vector();
        match &self.u0_mode {
            U0Mode::Kappa => problem.feedback(&x0),
            U0Mode::Scaled(f) => problem.feedback(&x0) * *f,
            U0Mode::Explicit(u) => DVector::from_column_slice(u),
        }
    }

    /// `φ(u0, x0) − γ` for the resolved initial control.
    pub fn initial_margin(&self, problem: &RelaxedProblem<ScenarioModel>) -> Result<f64> {
        problem.phi_minus_gamma(&self.resolve_u0(problem), &self.x0_vector())
    }

    pub fn tracking(&self) -> Result<TrackingConfig> {
        match self.law {
            LawKind::Fc => TrackingConfig::fixed_time_with_deadband(self.tau, self.deadband_eps),
            LawKind::Ec => TrackingConfig::exponential(DMatrix::from_diagonal(&DVector::from_column_slice(
                &self.ec_gain_diag,
            ))),
        }
    }

    /// Fully explicit TOML; loading it back yields an equal config.
    pub fn to_toml(&self) -> String {
        let (u0_mode, u0_factor, u0) = match &self.u0_mode {
            U0Mode::Kappa => ("kappa", None, None),
            U0Mode::Scaled(f) => ("scaled", Some(*f), None),
            U0Mode::Explicit(u) => ("explicit", None, Some(u.clone())),
        };
        let raw = RawConfig {
            scenario: self.scenario.as_str().to_string(),
            run_name: Some(self.run_name.clone()),
            output_dir: self.output_dir.clone(),
            law: Some(self.law),
            tau: Some(self.tau.seconds()),
            gamma: Some(self.gamma),
            mu_rate: Some(self.mu_rate),
            x0: Some(self.x0.clone()),
            u0_mode: Some(u0_mode.to_string()),
            u0_factor,
            u0,
            ec_gain_diag: Some(self.ec_gain_diag.clone()),
            deadband_eps: Some(self.deadband_eps),
            derivatives: Some(self.derivatives),
            tol_settle: Some(self.tol_settle),
            method: Some(self.integrator.method),
            dt: Some(self.integrator.dt),
            rel_tol: Some(self.integrator.rel_tol),
            abs_tol: Some(self.integrator.abs_tol),
            t_end: Some(self.integrator.t_end),
            sample_dt: Some(self.integrator.sample_dt),
            max_step_rejections: Some(self.integrator.max_step_rejections),
            newton_tol: Some(self.oracle.newton_tol),
            max_iters: Some(self.oracle.max_iters),
            backtrack_ratio: Some(self.oracle.backtrack_ratio),
            grid_points: Some(self.oracle.grid_points),
            grid_half_width: self.oracle.grid_half_width,
        };
        toml::to_string(&raw).expect("flat config always serializes")
    }
}
