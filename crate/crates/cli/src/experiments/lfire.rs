use contrastive::boed::{standardized_factory, RatioFactory};
use contrastive::distributions::Gaussian;
use contrastive::optimize::OptimizerConfig;
use contrastive::ratio::LogRatioModel;
use contrastive::rng;
use contrastive::sbi::{
    lfire_amortised_fit, marginal_pairs, posterior_from_ratio, simulate_joint, GaussianPrior, LinearGaussianSimulator,
    PosteriorGrid, Prior,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{resolved, usage, Experiment};
use crate::config::typed;
use crate::output::{float, Output};
use crate::CliError;

/// Amortised likelihood-free inference for `x = θ + ε` with a Gaussian prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LfireConfig {
    pub n: usize,
    pub noise_sd: f64,
    pub prior_sd: f64,
    pub family: String,
    /// Hidden units when `family = "mlp"`.
    pub hidden: usize,
    pub x_obs: Vec<f64>,
    pub resolution: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for LfireConfig {
    fn default() -> Self {
        Self {
            n: 100_000,
            noise_sd: 1.0,
            prior_sd: 1.0,
            family: "quadratic".into(),
            hidden: 16,
            x_obs: vec![1.0, -1.0],
            resolution: 400,
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LfireRow {
    pub x_obs: f64,
    pub posterior: PosteriorGrid,
    pub conjugate_mean: f64,
    pub conjugate_variance: f64,
    /// Against the conjugate posterior on the same lattice.
    pub total_variation: f64,
}

/// One amortised fit, then a posterior for every observation.
pub fn lfire_experiment(config: &LfireConfig) -> Result<(LogRatioModel, Vec<LfireRow>), CliError> {
    if config.n < 2 || config.resolution == 0 {
        return Err(usage("need n >= 2 and a positive resolution"));
    }
    if !(config.noise_sd > 0.0) {
        return Err(usage("noise_sd must be positive"));
    }
    let prior = GaussianPrior::new(Gaussian::univariate(0.0, config.prior_sd).map_err(|e| usage(e.to_string()))?);
    let sim = LinearGaussianSimulator { noise_sd: config.noise_sd };
    let run = || -> contrastive::Result<_> {
        let joint = simulate_joint(&sim, &prior, &[], config.n, rng::stream(config.seed, "joint"))?;
        let marginal = marginal_pairs(&joint, rng::stream(config.seed, "shuffle"))?;
        let factory = standardized_factory(&config.family, config.hidden, rng::stream(config.seed, "init"));
        let init = factory.model(&joint.concatenated()?)?;
        let h = lfire_amortised_fit(&joint, &marginal, &init, &config.optimizer)?;

        let (t2, s2) = (config.prior_sd.powi(2), config.noise_sd.powi(2));
        let conjugate_variance = t2 * s2 / (t2 + s2);
        let rows = config
            .x_obs
            .iter()
            .map(|&x| {
                let posterior = posterior_from_ratio(&h, &prior, &[x], config.resolution)?;
                let conjugate_mean = t2 * x / (t2 + s2);
                let exact = PosteriorGrid::from_log_weights(&prior.support(), config.resolution, |th| {
                    -(th[0] - conjugate_mean).powi(2) / (2.0 * conjugate_variance)
                })?;
                let total_variation = posterior.total_variation(&exact)?;
                Ok(LfireRow { x_obs: x, posterior, conjugate_mean, conjugate_variance, total_variation })
            })
            .collect::<contrastive::Result<Vec<_>>>()?;
        Ok((h, rows))
    };
    run().map_err(|e| CliError::Runtime(e.into()))
}

pub struct Lfire;

impl Experiment for Lfire {
    fn description(&self) -> &'static str {
        "amortised ratio fit and grid posteriors for a linear-Gaussian simulator"
    }

    fn run(&self, config: Value, out: &mut Output) -> Result<Value, CliError> {
        let config: LfireConfig = typed(config)?;
        let (_, rows) = lfire_experiment(&config)?;
        out.write("summary.csv", |w| {
            writeln!(w, "x_obs,mean,variance,conjugate_mean,conjugate_variance,total_variation")?;
            for r in &rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    float(r.x_obs),
                    float(r.posterior.mean()[0]),
                    float(r.posterior.variance()[0]),
                    float(r.conjugate_mean),
                    float(r.conjugate_variance),
                    float(r.total_variation)
                )?;
            }
            Ok(())
        })?;
        for (i, r) in rows.iter().enumerate() {
            out.write(&format!("posterior_{i}.csv"), |w| Ok(r.posterior.write_csv(w)?))?;
        }
        resolved(&config)
    }
}
