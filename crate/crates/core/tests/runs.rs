use nalgebra::DVector;
use proptest::prelude::*;

use fixtrack_core::experiment::{sweep_initial_values, sweep_settling_times, SweepOutcome};
use fixtrack_core::integrator::{integrate_ode, OdeSystem};
use fixtrack_core::output::read_csv;
use fixtrack_core::{
    closed_form_solution, emit_csv, load_config_str, run_scenario, Error, IntegratorConfig, LawKind, Method,
    Result, ScenarioConfig, ScenarioKey, SettlingTime, SummaryMetrics, U0Mode,
};

fn case_study() -> ScenarioConfig {
    ScenarioConfig::defaults(ScenarioKey::CaseStudy)
}

#[test]
fn scalar_scenario_follows_the_closed_form() {
    let mut cfg = ScenarioConfig::defaults(ScenarioKey::ScalarFixedTime);
    cfg.u0_mode = U0Mode::Explicit(vec![2.0]);
    let run = run_scenario(&cfg).unwrap();
    let tau = SettlingTime::new(3.0).unwrap();
    for r in &run.trajectory.records {
        let want = closed_form_solution(2.0, tau, r.t).unwrap();
        assert!((r.u[0] - want).abs() <= 1e-6, "t = {}", r.t);
        assert!(r.u_star[0].abs() <= 1e-12);
        assert!((r.err - r.u[0].abs()).abs() <= 1e-12);
        assert!((r.x[0] - (-r.t).exp()).abs() <= 1e-9);
    }
}

#[test]
fn equilibrium_run_stays_at_zero() {
    let mut cfg = case_study();
    cfg.x0 = vec![0.0; 3];
    cfg.u0_mode = U0Mode::Explicit(vec![0.0, 0.0]);
    let run = run_scenario(&cfg).unwrap();
    for r in &run.trajectory.records {
        assert!(r.x.iter().chain(&r.u).chain(&r.u_star).all(|v| v.abs() < 1e-12));
        assert!(r.err < 1e-12 && r.grad_norm < 1e-12);
    }
    let s = &run.summary;
    assert!(s.err_at_tau.unwrap() < 1e-12 && s.final_state_norm < 1e-12);
    assert_eq!(s.settle_time_measured, Some(0.0));
}

/// `y' = −2ty`, so `y = exp(−t²)`.
struct Gaussian;

impl OdeSystem for Gaussian {
    fn dim(&self) -> usize {
        1
    }

    fn rhs(&self, t: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(y * (-2.0 * t))
    }
}

#[test]
fn rk4_is_fourth_order() {
    let err = |dt: f64| {
        let cfg = IntegratorConfig {
            dt,
            sample_dt: 0.2,
            t_end: 1.0,
            ..IntegratorConfig::default()
        };
        let sol = integrate_ode(&Gaussian, &DVector::from_element(1, 1.0), &cfg).unwrap();
        (sol.states.last().unwrap()[0] - (-1.0f64).exp()).abs()
    };
    let (e1, e2, e3) = (err(0.05), err(0.025), err(0.0125));
    for ratio in [e1 / e2, e2 / e3] {
        assert!((13.0..19.0).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn adaptive_method_also_converges_on_the_case_study() {
    let mut cfg = case_study();
    cfg.integrator.method = Method::Rk45;
    cfg.integrator.dt = 1e-3;
    let run = run_scenario(&cfg).unwrap();
    assert!(run.trajectory.records.iter().all(|r| r.phi_minus_gamma < 0.0));
    assert!(run.summary.max_grad_norm_after_tau.unwrap() <= 1e-4);
    assert!(run.summary.max_err_after_tau.unwrap() <= 1e-3);
}

#[test]
fn csv_files_are_deterministic_and_rescorable() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = case_study();
    cfg.output_dir = Some(dir.path().to_path_buf());
    let run = run_scenario(&cfg).unwrap();
    let paths = run.paths.clone().unwrap();
    assert!(paths.summary.exists() && paths.plot.exists());

    let again = dir.path().join("again.csv");
    emit_csv(&run_scenario(&case_study()).unwrap().trajectory, &again).unwrap();
    assert_eq!(std::fs::read(&paths.csv).unwrap(), std::fs::read(&again).unwrap());

    let text = std::fs::read_to_string(&paths.csv).unwrap();
    assert!(text.ends_with('\n'));
    assert_eq!(text.lines().count(), 1 + cfg.integrator.sample_count());
    assert_eq!(cfg.integrator.sample_count(), 601);

    let rows = read_csv(&paths.csv).unwrap();
    let rescored = SummaryMetrics::from_rows(&rows, 3.0, cfg.tol_settle);
    assert_eq!(rescored, run.summary);
    let kv = std::fs::read_to_string(&paths.summary).unwrap();
    assert_eq!(kv, run.summary.to_kv());
}

#[test]
fn initial_value_sweep_skips_infeasible_factors() {
    let cfg = case_study();
    let rows = sweep_initial_values(&cfg, &[0.25, 0.5, 1.0, 2.0, -5.0]).unwrap();
    assert_eq!(rows.len(), 5);
    for r in &rows[..4] {
        let s = r.outcome.summary().unwrap();
        assert!(s.grad_norm_at_tau.unwrap() <= 1e-4, "factor {}", r.factor);
    }
    let p = cfg.problem().unwrap();
    let u = cfg.resolve_u0(&p) * -5.0;
    let want = p.phi_minus_gamma(&u, &cfg.x0_vector()).unwrap();
    match rows[4].outcome {
        SweepOutcome::Skipped { phi_minus_gamma } => assert_eq!(phi_minus_gamma, want),
        ref other => panic!("{other:?}"),
    }

    let single = sweep_initial_values(&cfg, &[1.0]).unwrap();
    let direct = run_scenario(&cfg).unwrap();
    assert_eq!(single[0].outcome.run().unwrap().trajectory.records, direct.trajectory.records);
}

#[test]
fn settling_time_sweep_tightens_coarse_steps() {
    let mut cfg = case_study();
    cfg.integrator.t_end = 1.0;
    let rows = sweep_settling_times(&cfg, &[0.05, 0.5]).unwrap();
    assert!(rows[0].warning.is_some());
    assert!((rows[0].dt_used - 0.05 / 3000.0).abs() < 1e-18);
    for r in &rows {
        let s = r.outcome.summary().unwrap();
        assert!(s.max_grad_norm_after_tau.unwrap() <= 1e-4, "tau {}", r.tau);
        assert!(s.settle_time_measured.unwrap() <= r.tau + 1e-9);
    }
    assert!(sweep_settling_times(&cfg, &[0.0]).is_err());
}

#[test]
fn long_settling_time_settles_before_it() {
    let rows = sweep_settling_times(&case_study(), &[5.0]).unwrap();
    let s = rows[0].outcome.summary().unwrap();
    assert!(rows[0].warning.is_none());
    assert!(s.settle_time_measured.unwrap() <= 5.0);
}

#[test]
fn exponential_law_lags_behind() {
    let fc = run_scenario(&case_study()).unwrap();
    let mut cfg = case_study();
    cfg.law = LawKind::Ec;
    let ec = run_scenario(&cfg).unwrap();
    assert!(ec.summary.err_at_tau.unwrap() > 10.0 * fc.summary.err_at_tau.unwrap());
}

#[test]
fn failed_runs_keep_the_partial_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = case_study();
    cfg.integrator.dt = 0.5;
    cfg.integrator.sample_dt = 0.5;
    cfg.output_dir = Some(dir.path().to_path_buf());
    match run_scenario(&cfg) {
        Err(Error::RunFailed { source, partial }) => {
            assert!(!source.is_validation());
            assert!(partial.failure.is_some());
            assert!(partial.records.iter().all(|r| r.phi_minus_gamma < 0.0));
            assert!(dir.path().join("run.csv").exists());
        }
        other => panic!("{:?}", other.map(|r| r.summary)),
    }
}

#[test]
fn infeasible_initial_control_is_a_validation_error() {
    let mut cfg = case_study();
    cfg.u0_mode = U0Mode::Explicit(vec![-40.0, 0.0]);
    assert!(run_scenario(&cfg).unwrap_err().is_validation());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips(
        tau in 0.1f64..10.0,
        gamma in 1e-4f64..1.0,
        mu_rate in 0.1f64..3.0,
        x0 in prop::array::uniform3(-10.0f64..10.0),
        factor in 0.05f64..2.0,
        ec in prop::array::uniform2(0.1f64..5.0),
        dt_exp in -4i32..-2,
        ec_law in any::<bool>(),
    ) {
        let mut cfg = case_study();
        cfg.tau = SettlingTime::new(tau).unwrap();
        cfg.gamma = gamma;
        cfg.mu_rate = mu_rate;
        cfg.x0 = x0.to_vec();
        cfg.u0_mode = U0Mode::Scaled(factor);
        cfg.ec_gain_diag = ec.to_vec();
        cfg.integrator.dt = 10f64.powi(dt_exp);
        cfg.law = if ec_law { LawKind::Ec } else { LawKind::Fc };
        cfg.run_name = "prop".into();
        prop_assume!(cfg.validate().is_ok());
        let back = load_config_str(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
