//! `oks-sim`: deterministic simulator for an optical Kerr shutter driving
//! time-bin to polarization conversion.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 numerical
//! failure while running a scenario.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use oks_core::config::ExperimentConfig;
use oks_core::scenarios;

#[derive(Parser)]
#[command(
    name = "oks-sim",
    version,
    about = "Optical Kerr shutter / time-bin conversion simulator",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file (key = value lines) layered over the built-in defaults
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the top-level random seed
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Write output here instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Output format (default: csv for scans, json for tomography)
    #[arg(long, global = true, value_enum, value_name = "FORMAT")]
    format: Option<Format>,

    /// Disable the pump-induced and dark background
    #[arg(long, global = true)]
    noiseless: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Gate transmission and counts versus pump-probe delay
    ScanDelay,
    /// Gate transmission versus pump polarization angle
    ScanAngle,
    /// Gate transmission, background, and SNR versus pump energy
    ScanEnergy,
    /// 36-setting process tomography of the conversion channel
    Tomography,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum Format {
    Csv,
    Json,
}

/// Failures carry the phase they occurred in, which fixes the exit code.
enum CliError {
    /// Bad configuration, bad flag combination, unreadable input,
    /// unwritable output.
    Usage(String),
    /// The scenario itself failed (singular system, non-finite values).
    Run(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Run(_) => ExitCode::from(3),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Run(m) => m,
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            ExperimentConfig::parse_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = load_config(cli)?;
    let run_err = |e: oks_core::Error| CliError::Run(e.to_string());
    let format = cli.format.unwrap_or(match cli.command {
        Command::Tomography => Format::Json,
        _ => Format::Csv,
    });

    let output = match cli.command {
        Command::ScanDelay => {
            let scan = scenarios::run_scan_delay(&cfg, cli.noiseless).map_err(run_err)?;
            match format {
                Format::Csv => scenarios::render_delay_csv(&scan),
                Format::Json => scenarios::render_delay_json(&scan).map_err(run_err)?,
            }
        }
        Command::ScanAngle => {
            let rows = scenarios::run_scan_angle(&cfg, cli.noiseless).map_err(run_err)?;
            match format {
                Format::Csv => scenarios::render_angle_csv(&rows),
                Format::Json => scenarios::render_angle_json(&rows).map_err(run_err)?,
            }
        }
        Command::ScanEnergy => {
            let rows = scenarios::run_scan_energy(&cfg, cli.noiseless).map_err(run_err)?;
            match format {
                Format::Csv => scenarios::render_energy_csv(&rows),
                Format::Json => scenarios::render_energy_json(&rows).map_err(run_err)?,
            }
        }
        Command::Tomography => {
            if format == Format::Csv {
                return Err(CliError::Usage(
                    "tomography emits a structured report; use --format json".into(),
                ));
            }
            let report = scenarios::run_tomography(&cfg, cli.noiseless).map_err(run_err)?;
            scenarios::render_tomography_json(&report).map_err(run_err)?
        }
    };
    Ok(output)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return e.exit_code();
        }
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = fs::write(path, &output) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{output}"),
    }
    ExitCode::SUCCESS
}
