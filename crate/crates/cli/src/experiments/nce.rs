use std::sync::Arc;

use contrastive::distributions::{Gaussian, Sampler, LN_2PI};
use contrastive::nce::{nce_fit, GaussianEnergy, NceConfig, NceEstimate};
use contrastive::points::median;
use contrastive::rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{resolved, usage, Experiment};
use crate::config::typed;
use crate::output::{float, Output};
use crate::CliError;

/// Replicated NCE fits of the Gaussian toy against a Gaussian reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NceExperimentConfig {
    pub sigma_true: f64,
    pub n: usize,
    pub reference_sd: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Its `seed` is replaced per replicate.
    pub fit: NceConfig,
}

impl Default for NceExperimentConfig {
    fn default() -> Self {
        Self { sigma_true: 2.0, n: 100_000, reference_sd: 3.0, replicates: 20, seed: 0, fit: NceConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NceRow {
    pub replicate: usize,
    pub estimate: NceEstimate,
    /// `ĉ + log sqrt(2π σ̂²)`.
    pub normalisation_error: f64,
}

pub fn nce_replicates(config: &NceExperimentConfig) -> Result<Vec<NceRow>, CliError> {
    if config.replicates == 0 || config.n == 0 {
        return Err(usage("replicates and n must be positive"));
    }
    let law = Gaussian::univariate(0.0, config.sigma_true).map_err(|e| usage(e.to_string()))?;
    let reference = Arc::new(Gaussian::univariate(0.0, config.reference_sd).map_err(|e| usage(e.to_string()))?);
    let (data_seed, fit_seed) = (rng::stream(config.seed, "data"), rng::stream(config.seed, "fit"));
    (0..config.replicates)
        .map(|replicate| {
            let data = law.sample(config.n, rng::derive(data_seed, replicate as u64));
            let fit = NceConfig { seed: rng::derive(fit_seed, replicate as u64), ..config.fit.clone() };
            let estimate = nce_fit(Arc::new(GaussianEnergy::new(1)), &data, reference.clone(), &fit)
                .map_err(anyhow::Error::from)?;
            let sigma = estimate.theta_hat[0];
            let normalisation_error = estimate.c_hat + 0.5 * (LN_2PI + 2.0 * sigma.abs().ln());
            log::info!("replicate {replicate}: sigma {sigma:.5}, normalisation error {normalisation_error:.2e}");
            Ok(NceRow { replicate, estimate, normalisation_error })
        })
        .collect()
}

pub struct Nce;

impl Experiment for Nce {
    fn description(&self) -> &'static str {
        "noise-contrastive estimation of a Gaussian scale and its normaliser"
    }

    fn run(&self, config: Value, out: &mut Output) -> Result<Value, CliError> {
        let config: NceExperimentConfig = typed(config)?;
        let rows = nce_replicates(&config)?;
        out.write("nce.csv", |w| {
            writeln!(w, "replicate,sigma_hat,c_hat,normalisation_error,initial_loss,final_loss,final_loss_se,iterations,termination")?;
            for r in &rows {
                let e = &r.estimate;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    r.replicate,
                    float(e.theta_hat[0]),
                    float(e.c_hat),
                    float(r.normalisation_error),
                    float(e.initial_loss),
                    float(e.final_loss),
                    float(e.final_loss_se),
                    e.trajectory.len().saturating_sub(1),
                    serde_json::to_value(e.termination)?.as_str().unwrap_or_default()
                )?;
            }
            Ok(())
        })?;
        out.write("trajectory.csv", |w| {
            writeln!(w, "iteration,loss")?;
            for (i, loss) in &rows[0].estimate.trajectory {
                writeln!(w, "{i},{}", float(*loss))?;
            }
            Ok(())
        })?;
        let sigmas: Vec<f64> = rows.iter().map(|r| r.estimate.theta_hat[0]).collect();
        let errors: Vec<f64> = rows.iter().map(|r| r.normalisation_error.abs()).collect();
        out.write_json(
            "summary.json",
            &json!({ "median_sigma_hat": median(&sigmas), "median_abs_normalisation_error": median(&errors) }),
        )?;
        resolved(&config)
    }
}
