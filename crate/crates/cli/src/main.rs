//! `thermident`: batch front end for building model identification and
//! internal-gains prediction.

mod commands;
mod config;
mod error;

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use thermident_core::Execution;

use crate::commands::Context;
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "thermident", version, about = "Grey-box RC building models: identification, internal gains and prediction")]
#[command(after_help = "Log level: THERMIDENT_LOG (error, warn, info, debug). Errors are written to stderr as JSON {code, message, line}.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the bundled six-zone sample building and its parameter files.
    Twin(Common),
    /// Validate a building description and write the discrete model.
    Build(Common),
    /// Generate an excitation airflow schedule.
    Excite(Common),
    /// Simulate a dataset from the building, parameters and operation mode.
    Synthesize(Common),
    /// Fit the physical parameters to the training datasets.
    Identify(Common),
    /// Estimate the weekly internal-gains profile from regular weeks.
    EstimateIg(Common),
    /// Run the fixed-profile and/or online predictors on the test dataset.
    Predict(Common),
    /// Score prediction files (or a stored score pair) and compare predictors.
    Evaluate(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Building description (overrides `paths.building`).
    #[arg(long)]
    building: Option<PathBuf>,
    /// Parameter file (overrides `paths.parameters`).
    #[arg(long)]
    parameters: Option<PathBuf>,
    /// Any config key, e.g. `--set model.dt=450 --set prediction.horizon=1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Run every loop on one thread.
    #[arg(long)]
    sequential: bool,
}

/// Exclusive marker in the output directory, removed on drop.
struct OutputLock(PathBuf);

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(".thermident.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(OutputLock(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Locked(path.display().to_string())),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

fn cwd_path(p: &Path) -> Result<String, CliError> {
    let abs = if p.is_absolute() { p.to_path_buf() } else { std::env::current_dir()?.join(p) };
    Ok(toml::Value::String(abs.display().to_string()).to_string())
}

fn context(common: &Common) -> Result<Context, CliError> {
    let mut overrides = common.overrides.clone();
    if let Some(o) = &common.out {
        overrides.push(format!("output_dir={}", cwd_path(o)?));
    }
    if let Some(s) = common.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(b) = &common.building {
        overrides.push(format!("paths.building={}", cwd_path(b)?));
    }
    if let Some(p) = &common.parameters {
        overrides.push(format!("paths.parameters={}", cwd_path(p)?));
    }
    let cfg = RunConfig::load(common.config.as_deref(), &overrides)?;
    let hash = cfg.hash()?;
    Ok(Context { cfg, hash, execution: if common.sequential { Execution::Sequential } else { Execution::Parallel } })
}

type Action = fn(&Context) -> Result<Vec<PathBuf>, CliError>;

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (common, action): (&Common, Action) = match &cli.command {
        Command::Twin(c) => (c, commands::twin_files),
        Command::Build(c) => (c, commands::build),
        Command::Excite(c) => (c, commands::excite),
        Command::Synthesize(c) => (c, commands::synthesize),
        Command::Identify(c) => (c, commands::identify),
        Command::EstimateIg(c) => (c, commands::estimate_ig),
        Command::Predict(c) => (c, commands::predict),
        Command::Evaluate(c) => (c, commands::evaluate),
    };
    let ctx = context(common)?;
    let _lock = OutputLock::acquire(&ctx.cfg.output_dir)?;
    log::info!("config hash {}", ctx.hash);
    action(&ctx)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("THERMIDENT_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
