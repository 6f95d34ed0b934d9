//! Registered experiments.

mod boed_sir;
mod chasm;
mod fig_loglik;
mod lfire;
mod nce;
mod selftest;

use std::sync::{Arc, LazyLock};

use contrastive::registry::Registry;
use serde::Serialize;
use serde_json::Value;

use crate::output::Output;
use crate::CliError;

pub use boed_sir::{BoedSir, CHECKS_HEADER};
pub use chasm::Chasm;
pub use fig_loglik::{loglik_grid, FigLoglik, FigLoglikConfig, LoglikRow};
pub use lfire::{lfire_experiment, Lfire, LfireConfig, LfireRow};
pub use nce::{nce_replicates, Nce, NceExperimentConfig, NceRow};
pub use selftest::{selftest_checks, Check, Selftest, SelftestConfig};

pub trait Experiment: Send + Sync {
    fn description(&self) -> &'static str;
    /// Runs with a partial config tree, writes artifacts into `out` and
    /// returns the config with every default filled in.
    fn run(&self, config: Value, out: &mut Output) -> Result<Value, CliError>;
}

fn entry(e: impl Experiment + 'static) -> Arc<dyn Experiment> {
    Arc::new(e)
}

static EXPERIMENTS: LazyLock<Registry<dyn Experiment>> = LazyLock::new(|| {
    Registry::new("experiment")
        .with("fig-loglik", entry(FigLoglik))
        .with("chasm", entry(Chasm))
        .with("nce", entry(Nce))
        .with("lfire", entry(Lfire))
        .with("boed-sir", entry(BoedSir))
        .with("selftest", entry(Selftest))
});

pub fn experiments() -> &'static Registry<dyn Experiment> {
    &EXPERIMENTS
}

fn resolved<C: Serialize>(config: &C) -> Result<Value, CliError> {
    serde_json::to_value(config).map_err(|e| CliError::Runtime(e.into()))
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
