//! Fixed-time tracking of the time-varying minimizer of a barrier-relaxed,
//! control-Lyapunov-constrained cost for input-affine systems.
//!
//! The controller state `u` evolves so that `∇ᵤJ̃(u, x, t)` follows the
//! fixed-time stable law `ż = −(π/τ)(|z|^½ + |z|^³ᐟ²)·sign(z)`, which drives
//! the tracking error to zero no later than the user-chosen `τ` while the
//! barrier keeps the Lyapunov decay constraint satisfied.
//!
//! Module map:
//! - [`fixed_time`]: the scalar law, its closed form and settling time.
//! - [`problem`], [`autodiff`], [`dual`]: the relaxed objective and its partials.
//! - [`tracking`]: FC and EC controller dynamics.
//! - [`integrator`], [`trajectory`]: guarded Runge–Kutta runs with recorded samples.
//! - [`oracle`]: the ground-truth minimizer.
//! - [`scenarios`], [`config`], [`experiment`], [`output`]: registry, configs,
//!   sweeps and files.

// NaN must fail feasibility and step-size checks, so `!(a < b)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod config;
pub mod dual;
pub mod error;
pub mod experiment;
pub mod fixed_time;
pub mod integrator;
pub mod oracle;
pub mod output;
pub mod problem;
pub mod scenarios;
pub mod selftest;
pub mod tracking;
pub mod trajectory;

pub use config::{load_config, load_config_str, ScenarioConfig, U0Mode};
pub use error::{Error, Result};
pub use experiment::{
    compare, run_scenario, sweep_initial_values, sweep_settling_times, RunOutput, SummaryMetrics,
};
pub use fixed_time::{closed_form_solution, psi, psi_vec, settling_time_of, SettlingTime};
pub use integrator::{IntegratorConfig, Method};
pub use oracle::{brute_force_ustar, solve_ustar, tracking_error, OracleConfig};
pub use output::emit_csv;
pub use problem::{DerivativeSource, Partials, RelaxedProblem};
pub use scenarios::{CaseStudy, ScenarioKey};
pub use tracking::{coupled_rhs, ec_udot, fc_udot, CoupledState, LawKind, TrackingConfig};
pub use trajectory::{integrate, SampleRecord, Trajectory};
