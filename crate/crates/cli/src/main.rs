//! `accelgates` command-line driver.

mod commands;
mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "accelgates", version, about = "Qubit rotations from accelerated motion through a cavity")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Absolute quadrature tolerance, overriding the config.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Print the fully resolved configuration and exit.
    #[arg(long, global = true)]
    emit_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Phase integrals I±(T) of every mode, optionally with M-integrals.
    Integrals,
    /// Rotation axis against acceleration or duration.
    Scan,
    /// Plan a segment sequence for a target rotation.
    Synthesize,
    /// Check perturbative results against the exact solver.
    OracleVerify,
    /// Convert a natural-unit acceleration to SI.
    Units {
        /// Gap as an angular frequency in rad/s.
        #[arg(long, conflicts_with = "gap_hz")]
        omega: Option<f64>,
        /// Gap as a frequency in Hz (Ω = 2π·f).
        #[arg(long)]
        gap_hz: Option<f64>,
        /// Acceleration in natural units.
        #[arg(long, default_value_t = 1.0)]
        accel: f64,
    },
}

fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.tolerances = accelgates::QuadratureOptions {
        max_evaluations: accelgates::QuadratureOptions::from_env().max_evaluations,
        ..cfg.tolerances
    }
    .with_tol(cli.tol.unwrap_or(cfg.tolerances.tol));
    if let Some(out) = &cli.out {
        cfg.output = Some(out.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(Failure::config)?;
    }
    let cfg = resolve(cli)?;
    let mut out: Box<dyn Write> = match &cfg.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    if cli.emit_config {
        writeln!(out, "{}", serde_json::to_string_pretty(&cfg).map_err(Failure::config)?)?;
        out.flush()?;
        return Ok(());
    }
    let result = match &cli.command {
        Command::Integrals => commands::integrals(&cfg, &mut out),
        Command::Scan => commands::scan(&cfg, &mut out),
        Command::Synthesize => commands::synthesize(&cfg, &mut out),
        Command::OracleVerify => commands::oracle_verify(&cfg, &mut out),
        Command::Units { omega, gap_hz, accel } => {
            let omega_si = match (omega, gap_hz) {
                (Some(w), _) => *w,
                (None, Some(f)) => 2.0 * std::f64::consts::PI * f,
                (None, None) => 2.0 * std::f64::consts::PI * 1e9,
            };
            commands::units(omega_si, *accel, &mut out)
        }
    };
    out.flush()?;
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code as u8)
        }
    }
}
