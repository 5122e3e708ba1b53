use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hfscat::commands::{self, cmd_compare, cmd_fit, cmd_run, output_root, parse_window, run_dir};
use hfscat::config::{preset, RunConfig};
use hfscat::verify::{report_checks, run_checks_with, Faults, Level};
use hfscat::Error;

/// Pseudospectral Hartree-Fock dynamics with scattering diagnostics.
///
/// Runs are written below $HFSCAT_OUT (default ./hfscat-runs).
#[derive(Parser)]
#[command(name = "hfscat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a config file (or a shipped preset name) and write its artifacts.
    Run { config: String },
    /// Run the same data under hartree-fock and reduced-hartree.
    Compare { config: String },
    /// Run the built-in invariant suites.
    Verify {
        #[arg(long, default_value = "fast", value_parser = clap::value_parser!(LevelArg))]
        level: LevelArg,
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
    /// Power-law fit of a stored series.
    Fit {
        run_dir: PathBuf,
        #[arg(long)]
        quantity: String,
        /// `t_lo:t_hi`
        #[arg(long)]
        window: String,
    },
}

#[derive(Clone)]
struct LevelArg(Level);

impl std::str::FromStr for LevelArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(LevelArg).map_err(|e: Error| e.to_string())
    }
}

fn load(config: &str) -> hfscat::Result<RunConfig> {
    let path = Path::new(config);
    if !path.exists() {
        if let Ok(cfg) = preset(config) {
            return Ok(cfg);
        }
    }
    RunConfig::load(path)
}

fn print_json(v: &impl serde::Serialize) -> hfscat::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn execute(cli: Cli) -> hfscat::Result<u8> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let dir = run_dir(&cfg, &output_root());
            let report = cmd_run(&cfg, &dir)?;
            print_json(&serde_json::json!({
                "run_dir": dir,
                "config_hash": report.header.config_hash,
                "sup_decay_exponent": report.sup_decay_exponent,
                "cauchy_exponent": report.cauchy_exponent,
                "s1_exponent": report.s1_exponent,
                "mass_drift": report.mass_drift,
                "warnings": report.warnings,
            }))?;
            Ok(0)
        }
        Command::Compare { config } => {
            let cfg = load(&config)?;
            let dir = run_dir(&cfg, &output_root()).with_extension("compare");
            let report = cmd_compare(&cfg, &dir)?;
            print_json(&report)?;
            Ok(0)
        }
        Command::Verify { level, inject_fault } => {
            let mut faults = Faults::default();
            match inject_fault.as_deref() {
                None => {}
                Some("exchange-sign") => faults.exchange_sign = -1.0,
                Some(other) => return Err(Error::InvalidArgument(format!("unknown fault `{other}`"))),
            }
            let results = run_checks_with(level.0, &faults);
            let ok = report_checks(&results, &mut std::io::stdout().lock())?;
            if ok {
                return Ok(0);
            }
            let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.check.as_str()).collect();
            eprintln!(
                "{}",
                serde_json::json!({ "error": "verify_failed", "failed": failed, "exit_code": 1 })
            );
            Ok(1)
        }
        Command::Fit {
            run_dir,
            quantity,
            window,
        } => {
            let record = cmd_fit(&run_dir, &quantity, parse_window(&window)?)?;
            print_json(&record)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", commands::error_json(&e));
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
