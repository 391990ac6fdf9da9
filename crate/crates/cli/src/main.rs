use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fixtrack_core::experiment::{format_tau_table, format_u0_table, SweepOutcome};
use fixtrack_core::{
    compare, load_config, run_scenario, selftest, sweep_initial_values, sweep_settling_times, Error,
    RunOutput, ScenarioConfig,
};

/// Where runs write when neither `--out` nor `output_dir` is given.
const DEFAULT_OUT: &str = "out";

#[derive(Parser)]
#[command(name = "fixtrack", version, about = "Fixed-time tracking of barrier-relaxed optimal controls")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write CSV, summary and plot script.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One run per scaling of the initial control.
    SweepU0 {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        factors: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One run per settling time.
    SweepTau {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        taus: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the fixed-time and exponential laws side by side.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form, derivative and oracle self-checks.
    Selftest,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        1
    } else {
        2
    }
}

fn load(path: &Path, out: Option<PathBuf>) -> Result<ScenarioConfig, Error> {
    let mut cfg = load_config(path)?;
    if out.is_some() {
        cfg.output_dir = out;
    } else if cfg.output_dir.is_none() {
        cfg.output_dir = Some(PathBuf::from(DEFAULT_OUT));
    }
    Ok(cfg)
}

fn report(run: &RunOutput) {
    if let Some(p) = &run.paths {
        println!("wrote {}", p.csv.display());
        println!("wrote {}", p.summary.display());
        println!("wrote {}", p.plot.display());
    }
    print!("{}", run.summary.to_kv());
}

fn sweep_status<'a>(outcomes: impl Iterator<Item = &'a SweepOutcome>) -> Result<(), Error> {
    for o in outcomes {
        if let SweepOutcome::Failed { reason } = o {
            return Err(Error::Integration {
                t: f64::NAN,
                reason: reason.clone(),
                last_state: Vec::new(),
            });
        }
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = load(&config, out)?;
            report(&run_scenario(&cfg)?);
        }
        Command::SweepU0 { config, factors, out } => {
            let cfg = load(&config, out)?;
            let rows = sweep_initial_values(&cfg, &factors)?;
            print!("{}", format_u0_table(&rows));
            sweep_status(rows.iter().map(|r| &r.outcome))?;
        }
        Command::SweepTau { config, taus, out } => {
            let cfg = load(&config, out)?;
            let rows = sweep_settling_times(&cfg, &taus)?;
            for w in rows.iter().filter_map(|r| r.warning.as_deref()) {
                eprintln!("warning: {w}");
            }
            print!("{}", format_tau_table(&rows));
            sweep_status(rows.iter().map(|r| &r.outcome))?;
        }
        Command::Compare { config, out } => {
            let cfg = load(&config, out)?;
            let (cmp, joint) = compare(&cfg)?;
            println!("[fc]");
            report(&cmp.fc);
            println!("[ec]");
            report(&cmp.ec);
            if let Some(p) = joint {
                println!("wrote {}", p.display());
            }
        }
        Command::Selftest => {
            let checks = selftest::run();
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().any(|c| !c.passed) {
                return Err(Error::Oracle("self-test failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::RunFailed { partial, .. } = &e {
                if let Some(f) = &partial.failure {
                    eprintln!("run stopped at t = {} after {} samples", f.time, partial.records.len());
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
