//! Scenario runs, parameter sweeps and the FC/EC comparison.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, U0Mode};
use crate::error::{Error, Result};
use crate::fixed_time::SettlingTime;
use crate::output::{self, CsvRow, RunPaths};
use crate::tracking::LawKind;
use crate::trajectory::{integrate, Trajectory};

/// Per-run metrics. Computed from the CSV columns alone, so a written run can
/// be re-scored without re-integrating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryMetrics {
    pub tau: f64,
    pub tol_settle: f64,
    /// `‖u − u*‖` at the sample nearest `τ`; `None` if `τ` lies past the horizon.
    pub err_at_tau: Option<f64>,
    pub grad_norm_at_tau: Option<f64>,
    /// Largest `‖∇ᵤJ̃‖` over samples with `t ≥ τ`.
    pub max_grad_norm_after_tau: Option<f64>,
    pub max_err_after_tau: Option<f64>,
    pub max_phi_minus_gamma: f64,
    /// First sample time from which `‖∇ᵤJ̃‖ ≤ tol_settle` holds to the end.
    pub settle_time_measured: Option<f64>,
    pub final_time: f64,
    pub final_state_norm: f64,
    pub samples: usize,
}

fn max_of(it: impl Iterator<Item = f64>) -> Option<f64> {
    it.fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

impl SummaryMetrics {
    pub fn from_rows(rows: &[CsvRow], tau: f64, tol_settle: f64) -> Self {
        let half_step = match rows {
            [a, b, ..] => 0.5 * (b.t - a.t),
            _ => 0.0,
        };
        let at_tau = rows
            .iter()
            .min_by(|a, b| (a.t - tau).abs().total_cmp(&(b.t - tau).abs()))
            .filter(|r| (r.t - tau).abs() <= half_step + 1e-12);
        // tolerate sample times like 2.9999999999999996 for τ = 3
        let after = |r: &&CsvRow| r.t >= tau - 1e-9;

        let mut settle = None;
        for r in rows.iter().rev() {
            if r.grad_norm <= tol_settle {
                settle = Some(r.t);
            } else {
                break;
            }
        }
        let last = rows.last();
        Self {
            tau,
            tol_settle,
            err_at_tau: at_tau.map(|r| r.err),
            grad_norm_at_tau: at_tau.map(|r| r.grad_norm),
            max_grad_norm_after_tau: max_of(rows.iter().filter(after).map(|r| r.grad_norm)),
            max_err_after_tau: max_of(rows.iter().filter(after).map(|r| r.err)),
            max_phi_minus_gamma: max_of(rows.iter().map(|r| r.phi_minus_gamma)).unwrap_or(f64::NAN),
            settle_time_measured: settle,
            final_time: last.map_or(0.0, |r| r.t),
            final_state_norm: last.map_or(f64::NAN, |r| r.x.iter().map(|v| v * v).sum::<f64>().sqrt()),
            samples: rows.len(),
        }
    }

    pub fn from_trajectory(traj: &Trajectory, tau: f64, tol_settle: f64) -> Self {
        let rows: Vec<CsvRow> = traj.records.iter().map(CsvRow::from).collect();
        Self::from_rows(&rows, tau, tol_settle)
    }

    /// `key = value` lines; absent values print as `none`.
    pub fn to_kv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), output::format_value);
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("tau", output::format_value(self.tau));
        line("tol_settle", output::format_value(self.tol_settle));
        line("err_at_tau", opt(self.err_at_tau));
        line("grad_norm_at_tau", opt(self.grad_norm_at_tau));
        line("max_grad_norm_after_tau", opt(self.max_grad_norm_after_tau));
        line("max_err_after_tau", opt(self.max_err_after_tau));
        line("max_phi_minus_gamma", output::format_value(self.max_phi_minus_gamma));
        line("settle_time_measured", opt(self.settle_time_measured));
        line("final_time", output::format_value(self.final_time));
        line("final_state_norm", output::format_value(self.final_state_norm));
        line("samples", self.samples.to_string());
        s
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub trajectory: Trajectory,
    pub summary: SummaryMetrics,
    /// Set when the config named an output directory.
    pub paths: Option<RunPaths>,
}

/// Write CSV, summary and plot script for a run into `dir`.
pub fn write_run(traj: &Trajectory, summary: &SummaryMetrics, dir: &Path, stem: &str) -> Result<RunPaths> {
    let paths = RunPaths::new(dir, stem);
    output::emit_csv(traj, &paths.csv)?;
    output::write_text(&paths.summary, &summary.to_kv())?;
    output::write_text(
        &paths.plot,
        &output::gnuplot_script(&paths.csv, traj.meta.state_dim, traj.meta.input_dim),
    )?;
    Ok(paths)
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    let tracking = cfg.tracking()?;
    let x0 = cfg.x0_vector();
    let u0 = cfg.resolve_u0(&problem);
    let mut traj = match integrate(&problem, &tracking, &cfg.integrator, &cfg.oracle, &x0, &u0) {
        Ok(t) => t,
        Err(Error::RunFailed { source, mut partial }) => {
            partial.meta.config = Some(cfg.to_toml());
            if let Some(dir) = &cfg.output_dir {
                let summary = SummaryMetrics::from_trajectory(&partial, cfg.tau.seconds(), cfg.tol_settle);
                write_run(&partial, &summary, dir, &cfg.run_name)?;
            }
            return Err(Error::RunFailed { source, partial });
        }
        Err(e) => return Err(e),
    };
    traj.meta.config = Some(cfg.to_toml());
    let summary = SummaryMetrics::from_trajectory(&traj, cfg.tau.seconds(), cfg.tol_settle);
    let paths = match &cfg.output_dir {
        Some(dir) => Some(write_run(&traj, &summary, dir, &cfg.run_name)?),
        None => None,
    };
    Ok(RunOutput {
        config: cfg.clone(),
        trajectory: traj,
        summary,
        paths,
    })
}

#[derive(Debug, Clone)]
pub enum SweepOutcome {
    Completed(Box<RunOutput>),
    /// The initial control was not strictly feasible and the run was not attempted.
    Skipped { phi_minus_gamma: f64 },
    Failed { reason: String },
}

impl SweepOutcome {
    pub fn run(&self) -> Option<&RunOutput> {
        match self {
            SweepOutcome::Completed(r) => Some(r),
            _ => None,
        }
    }

    pub fn summary(&self) -> Option<&SummaryMetrics> {
        self.run().map(|r| &r.summary)
    }
}

#[derive(Debug, Clone)]
pub struct U0SweepRow {
    pub factor: f64,
    pub outcome: SweepOutcome,
}

#[derive(Debug, Clone)]
pub struct TauSweepRow {
    pub tau: f64,
    pub dt_used: f64,
    /// Set when the configured step was too coarse for this `τ` and was tightened.
    pub warning: Option<String>,
    pub outcome: SweepOutcome,
}

fn run_outcome(cfg: &ScenarioConfig) -> SweepOutcome {
    match run_scenario(cfg) {
        Ok(r) => SweepOutcome::Completed(Box::new(r)),
        Err(e) => SweepOutcome::Failed { reason: e.to_string() },
    }
}

fn factor_label(v: f64) -> String {
    format!("{v}").replace('-', "m")
}

/// One run per factor with `u(0) = factor·u₀`, where `u₀` is the base
/// config's initial control. Infeasible factors are skipped, not run.
pub fn sweep_initial_values(base: &ScenarioConfig, factors: &[f64]) -> Result<Vec<U0SweepRow>> {
    base.validate()?;
    let problem = base.problem()?;
    let x0 = base.x0_vector();
    let base_u0 = base.resolve_u0(&problem);
    let rows = factors
        .par_iter()
        .map(|&factor| {
            let mut cfg = base.clone();
            cfg.u0_mode = match base.u0_mode {
                U0Mode::Kappa => U0Mode::Scaled(factor),
                _ => U0Mode::Explicit((&base_u0 * factor).as_slice().to_vec()),
            };
            cfg.run_name = format!("{}_u0x{}", base.run_name, factor_label(factor));
            let outcome = match problem.phi_minus_gamma(&cfg.resolve_u0(&problem), &x0) {
                Ok(z) if z < 0.0 => run_outcome(&cfg),
                Ok(z) => SweepOutcome::Skipped { phi_minus_gamma: z },
                Err(e) => SweepOutcome::Failed { reason: e.to_string() },
            };
            U0SweepRow { factor, outcome }
        })
        .collect();
    Ok(rows)
}

/// Step size that keeps `τ/dt ≥ 3000`, the resolution the fixed-time law
/// needs near its settling instant.
pub fn step_for_tau(dt: f64, tau: f64) -> f64 {
    dt.min(tau / 3000.0)
}

pub fn sweep_settling_times(base: &ScenarioConfig, taus: &[f64]) -> Result<Vec<TauSweepRow>> {
    base.validate()?;
    for &tau in taus {
        SettlingTime::new(tau)?;
    }
    let rows = taus
        .par_iter()
        .map(|&tau| {
            let mut cfg = base.clone();
            cfg.tau = SettlingTime::new(tau).expect("checked above");
            let dt = step_for_tau(base.integrator.dt, tau);
            let warning = (dt < base.integrator.dt).then(|| {
                format!(
                    "dt = {} is too coarse for tau = {tau} s; tightened to {dt:e}",
                    base.integrator.dt
                )
            });
            cfg.integrator.dt = dt;
            cfg.run_name = format!("{}_tau{}", base.run_name, factor_label(tau));
            TauSweepRow {
                tau,
                dt_used: dt,
                warning,
                outcome: run_outcome(&cfg),
            }
        })
        .collect();
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub fc: RunOutput,
    pub ec: RunOutput,
}

/// Run the same scenario under both laws. Per-law files get `_fc`/`_ec`
/// suffixes; the joint CSV is written as `<run_name>_compare.csv`.
pub fn compare(base: &ScenarioConfig) -> Result<(Comparison, Option<PathBuf>)> {
    let make = |law: LawKind, suffix: &str| {
        let mut c = base.clone();
        c.law = law;
        c.run_name = format!("{}_{suffix}", base.run_name);
        c
    };
    let (fc, ec) = rayon::join(
        || run_scenario(&make(LawKind::Fc, "fc")),
        || run_scenario(&make(LawKind::Ec, "ec")),
    );
    let cmp = Comparison { fc: fc?, ec: ec? };
    let joint = match &base.output_dir {
        Some(dir) => {
            let path = dir.join(format!("{}_compare.csv", base.run_name));
            write_comparison_csv(&cmp, &path)?;
            Some(path)
        }
        None => None,
    };
    Ok((cmp, joint))
}

/// `t, fc_x*, ec_x*, fc_err, ec_err, fc_grad_norm, ec_grad_norm` per shared sample.
pub fn write_comparison_csv(cmp: &Comparison, path: &Path) -> Result<()> {
    let n = cmp.fc.trajectory.meta.state_dim;
    let mut text = String::from("t");
    for law in ["fc", "ec"] {
        for i in 1..=n {
            let _ = write!(text, ",{law}_x{i}");
        }
    }
    text.push_str(",fc_err,ec_err,fc_grad_norm,ec_grad_norm\n");
    for (a, b) in cmp.fc.trajectory.records.iter().zip(&cmp.ec.trajectory.records) {
        let vals = std::iter::once(a.t)
            .chain(a.x.iter().copied())
            .chain(b.x.iter().copied())
            .chain([a.err, b.err, a.grad_norm, b.grad_norm]);
        let line: Vec<String> = vals.map(output::format_value).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    output::write_text(path, &text)
}

/// Table of sweep results, one line per row.
pub fn format_u0_table(rows: &[U0SweepRow]) -> String {
    let mut s = String::from("factor,status,settle_time_measured,grad_norm_at_tau,err_at_tau,detail\n");
    for r in rows {
        let _ = writeln!(s, "{}", sweep_line(&r.factor.to_string(), &r.outcome, ""));
    }
    s
}

pub fn format_tau_table(rows: &[TauSweepRow]) -> String {
    let mut s = String::from("tau,status,settle_time_measured,grad_norm_at_tau,err_at_tau,detail\n");
    for r in rows {
        let note = r.warning.clone().unwrap_or_default();
        let _ = writeln!(s, "{}", sweep_line(&r.tau.to_string(), &r.outcome, &note));
    }
    s
}

fn sweep_line(key: &str, outcome: &SweepOutcome, note: &str) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "none".into(), |v| format!("{v:e}"));
    match outcome {
        SweepOutcome::Completed(r) => format!(
            "{key},ok,{},{},{},{}",
            opt(r.summary.settle_time_measured),
            opt(r.summary.grad_norm_at_tau),
            opt(r.summary.err_at_tau),
            note
        ),
        SweepOutcome::Skipped { phi_minus_gamma } => {
            format!("{key},skipped,none,none,none,infeasible u0: phi - gamma = {phi_minus_gamma:e}")
        }
        SweepOutcome::Failed { reason } => format!("{key},failed,none,none,none,{}", reason.replace(',', ";")),
    }
}
