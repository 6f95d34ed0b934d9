//! Command-line runner for the `contrastive` experiments.
//!
//! Every experiment reads a TOML (or JSON) config, applies `--set`
//! overrides and `--seed`, writes CSV/JSON artifacts into `--out` together
//! with a `manifest.json`, and records wall-clock time separately in
//! `timing.json` so that the remaining files are byte-identical across runs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

pub use config::RunConfig;
pub use experiments::{experiments, Experiment};
pub use output::Output;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Experiments: fig-loglik, chasm, nce, lfire, boed-sir, selftest.
#[derive(Debug, Parser)]
#[command(name = "contrastive", version = output::VERSION, about)]
pub struct Cli {
    /// Experiment to run.
    pub experiment: String,
    /// TOML or JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override a config entry, e.g. `--set n=1000` or `--set optimizer.max_iters=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Runtime(err) => write!(f, "error: {err:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Runtime(err)
    }
}

/// Runs an already parsed configuration.
pub fn execute(run: &RunConfig) -> Result<(), CliError> {
    let experiment = experiments().get(&run.experiment).map_err(|e| CliError::Usage(e.to_string()))?;
    let config = run.resolved_config()?;
    let mut out = Output::create(&run.out).map_err(CliError::Runtime)?;
    let start = Instant::now();
    let resolved = experiment.run(config, &mut out)?;
    let elapsed = start.elapsed().as_secs_f64();
    out.finish(&run.experiment, &resolved, elapsed).map_err(CliError::Runtime)?;
    log::info!("{} finished in {elapsed:.2} s; outputs in {}", run.experiment, run.out.display());
    Ok(())
}

/// Parses `args` (including the program name), runs the experiment and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { EXIT_USAGE } else { EXIT_SUCCESS };
        }
    };
    let result = RunConfig::from_cli(&cli).and_then(|run| execute(&run));
    match result {
        Ok(()) => EXIT_SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            err.exit_code()
        }
    }
}
