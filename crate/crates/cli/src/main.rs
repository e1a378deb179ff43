//! `monodrift`: reproducible runs of the monodrift toolkit from a TOML configuration.

// `!(x < bound)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;
mod plot;
mod run;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use monodrift_core::Error;

use config::{ConfigError, ConfigErrors};
use output::{sha256_hex, Manifest, Outputs, Versions};

#[derive(Parser)]
#[command(
    name = "monodrift",
    version,
    about = "Stochastic evolution equations: constants, simulation, stationary laws and large deviations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML), or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to MONODRIFT_WORKERS, then the configuration.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    /// Derived constants, thresholds and sampled condition audits.
    Check,
    /// One trajectory and its energy series.
    Simulate,
    /// Monte Carlo check of the energy and exponential bounds.
    Estimates,
    /// Pull-back run towards the stationary solution.
    Pullback,
    /// Independent draws of the stationary law.
    Invariant,
    /// Minimum action to reach a target state.
    Rate,
    /// Rate against the squared V-norm over several targets.
    Quasipotential,
    /// Small-noise probabilities and the fit of -eps log p.
    Probe,
    /// Write the documented configuration schema.
    Schema,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Simulate => "simulate",
            Command::Estimates => "estimates",
            Command::Pullback => "pullback",
            Command::Invariant => "invariant",
            Command::Rate => "rate",
            Command::Quasipotential => "quasipotential",
            Command::Probe => "probe",
            Command::Schema => "schema",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error:\n{0}")]
    Config(ConfigErrors),
    #[error("computation error: {0}")]
    Compute(Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ConfigError> for ConfigErrors {
    fn from(e: ConfigError) -> Self {
        ConfigErrors(vec![e])
    }
}

impl From<Error> for CliError {
    /// Errors about parameters trace back to the configuration.
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::Configuration(_)
            | Error::Inadmissible { .. }
            | Error::UnsupportedGrowth(_) => CliError::Config(
                ConfigError {
                    line: None,
                    message: e.to_string(),
                }
                .into(),
            ),
            e => CliError::Compute(e),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) | CliError::Io(_) => 1,
        }
    }
}

fn workers(flag: Option<usize>, cfg: &config::Resolved) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    if let Ok(v) = std::env::var("MONODRIFT_WORKERS") {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(
                ConfigError {
                    line: None,
                    message: format!("MONODRIFT_WORKERS = {v:?} is not a positive integer"),
                }
                .into(),
            )),
        };
    }
    Ok(cfg.int("", "workers").map(|n| n as usize))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if cli.command == Command::Schema {
        let text = config::schema();
        match cli.out {
            Some(dir) => Outputs::new(&dir)?.text("schema.toml", &text)?,
            None => print!("{text}"),
        }
        return Ok(());
    }
    let path = cli.config.ok_or_else(|| {
        CliError::Config(
            ConfigError {
                line: None,
                message: "--config is required".into(),
            }
            .into(),
        )
    })?;
    let mut cfg = config::parse_file(&path).map_err(CliError::Config)?;
    if let Some(seed) = cli.seed {
        cfg.set("", "seed", toml::Value::Integer(seed as i64));
    }
    let dir = match (cli.out, cfg.str("", "out")) {
        (Some(d), _) => d,
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => PathBuf::from("monodrift-out").join(cli.command.name()),
    };
    if let Some(n) = workers(cli.workers, &cfg)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| std::io::Error::other(e.to_string()))?;
    }

    let prepared = setup::prepare(&cfg, cli.command).map_err(CliError::Config)?;
    let mut out = Outputs::new(&dir)?;
    let mut ctx = run::Ctx {
        cfg: &cfg,
        p: &prepared,
        out: &mut out,
    };
    match cli.command {
        Command::Check => run::check(&mut ctx)?,
        Command::Simulate => run::simulate_run(&mut ctx)?,
        Command::Estimates => run::estimates(&mut ctx)?,
        Command::Pullback => run::pullback_run(&mut ctx)?,
        Command::Invariant => run::invariant(&mut ctx)?,
        Command::Rate => run::rate(&mut ctx)?,
        Command::Quasipotential => run::quasipotential(&mut ctx)?,
        Command::Probe => run::probe(&mut ctx)?,
        Command::Schema => unreachable!("handled above"),
    }

    let canonical = cfg.canonical();
    let mut outputs = out.files.clone();
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        subcommand: cli.command.name().into(),
        seed: prepared.seed,
        config_sha256: sha256_hex(canonical.as_bytes()),
        versions: Versions {
            monodrift: env!("CARGO_PKG_VERSION"),
            monodrift_core: monodrift_core::VERSION,
        },
        outputs,
        csv_sha256: out.csv_sha256.clone(),
        resolved_config: canonical,
    };
    out.json("manifest.json", &manifest)?;
    println!("{} written to {}", cli.command.name(), dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("monodrift: {e}");
            ExitCode::from(e.code())
        }
    }
}
