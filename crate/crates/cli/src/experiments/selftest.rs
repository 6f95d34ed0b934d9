use std::sync::Arc;

use contrastive::boed::{sir_trajectory, SirConfig};
use contrastive::distributions::{Density, Gaussian, Sampler};
use contrastive::optimize::finite_difference_check;
use contrastive::ratio::{
    family_by_name, logistic_loss, LabeledTwoSample, LogRatioModel, LogisticObjective, Mlp, RatioFamily, TWO_LN_2,
};
use contrastive::rng;
use contrastive::sbi::{posterior_from_ratio, GaussianPrior, PosteriorGrid, Prior};
use contrastive::tre::{linear_combination_scale, uniform_schedule};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{resolved, Experiment};
use crate::config::typed;
use crate::output::{float, Output};
use crate::CliError;

/// Fast deterministic identities that every build should satisfy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelftestConfig {
    /// Sample size per check.
    pub n: usize,
    pub seed: u64,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        Self { n: 500, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

fn gradient_error(seed: u64, n: usize) -> contrastive::Result<f64> {
    let mut r = rng::rng(seed);
    let mut worst: f64 = 0.0;
    for trial in 0..6 {
        let dim = 1 + trial % 3;
        let family: Arc<dyn RatioFamily> =
            if trial % 2 == 0 { family_by_name("quadratic", dim, 0)? } else { Arc::new(Mlp::new(dim, 4)) };
        let p = Gaussian::isotropic(dim, 1.0)?;
        let q = Gaussian::isotropic(dim, 2.0)?;
        let sample = LabeledTwoSample::new(p.sample(n, r.random()), q.sample(n, r.random()))?;
        let w: Vec<f64> = (0..family.n_params()).map(|_| r.random_range(-0.8..0.8)).collect();
        let objective = LogisticObjective::new(family, Arc::new(sample))?;
        worst = worst.max(finite_difference_check(&objective, &w, 1e-6));
    }
    Ok(worst)
}

fn telescoping_error(seed: u64, n: usize) -> contrastive::Result<f64> {
    let (k, d, alpha) = (4, 3, 8.0);
    let laws = uniform_schedule(k)
        .iter()
        .map(|a| Gaussian::isotropic(d, linear_combination_scale(*a, 1.0, alpha)))
        .collect::<contrastive::Result<Vec<_>>>()?;
    let (first, last) = (&laws[0], &laws[k + 1]);
    let points = Gaussian::isotropic(d, alpha)?.sample(n, seed);
    Ok(points
        .rows()
        .map(|x| {
            let telescoped: f64 = laws.windows(2).map(|w| w[0].log_density(x) - w[1].log_density(x)).sum();
            (telescoped - (first.log_density(x) - last.log_density(x))).abs()
        })
        .fold(0.0, f64::max))
}

fn zero_ratio_posterior_error() -> contrastive::Result<f64> {
    let prior = GaussianPrior::standard(1);
    let h = LogRatioModel::fixed(2, |_| 0.0);
    let posterior = posterior_from_ratio(&h, &prior, &[0.7], 200)?;
    let exact = PosteriorGrid::from_log_weights(&prior.support(), 200, |t| prior.log_density(t))?;
    posterior.total_variation(&exact)
}

fn sir_conservation_error(seed: u64) -> contrastive::Result<f64> {
    let config = SirConfig::default();
    let mut worst = 0u64;
    for k in 0..20u64 {
        let beta = 0.15 * k as f64;
        for state in sir_trajectory(&config, beta, 0.4, rng::derive(seed, k))? {
            worst = worst.max((state.s + state.i + state.r).abs_diff(config.population));
        }
    }
    Ok(worst as f64)
}

pub fn selftest_checks(config: &SelftestConfig) -> Result<Vec<Check>, CliError> {
    let n = config.n.max(2);
    let run = || -> contrastive::Result<Vec<Check>> {
        let p = Gaussian::univariate(0.0, 1.0)?;
        let q = Gaussian::univariate(2.0, 3.0)?;
        let sample = LabeledTwoSample::new(
            p.sample(n, rng::stream(config.seed, "p")),
            q.sample(n, rng::stream(config.seed, "q")),
        )?;
        let zero = LogRatioModel::zeros(family_by_name("linear", 1, 0)?);
        let calibration = (logistic_loss(&zero, &sample)?.loss - TWO_LN_2).abs();
        Ok(vec![
            Check { name: "loss_at_zero_ratio", value: calibration, tolerance: 1e-12 },
            Check {
                name: "loss_gradient",
                value: gradient_error(rng::stream(config.seed, "gradient"), n)?,
                tolerance: 1e-4,
            },
            Check {
                name: "telescoping",
                value: telescoping_error(rng::stream(config.seed, "telescoping"), n)?,
                tolerance: 1e-12,
            },
            Check { name: "zero_ratio_posterior", value: zero_ratio_posterior_error()?, tolerance: 1e-12 },
            Check {
                name: "sir_conservation",
                value: sir_conservation_error(rng::stream(config.seed, "sir"))?,
                tolerance: 0.0,
            },
        ])
    };
    run().map_err(|e| CliError::Runtime(e.into()))
}

pub struct Selftest;

impl Experiment for Selftest {
    fn description(&self) -> &'static str {
        "quick identity checks of the loss, gradients, telescoping, posteriors and SIR"
    }

    fn run(&self, config: Value, out: &mut Output) -> Result<Value, CliError> {
        let config: SelftestConfig = typed(config)?;
        let checks = selftest_checks(&config)?;
        out.write("selftest.csv", |w| {
            writeln!(w, "check,value,tolerance,passed")?;
            for c in &checks {
                writeln!(w, "{},{},{},{}", c.name, float(c.value), float(c.tolerance), c.passed())?;
            }
            Ok(())
        })?;
        let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
        if !failed.is_empty() {
            return Err(CliError::Runtime(anyhow::anyhow!("self-test failed: {}", failed.join(", "))));
        }
        resolved(&config)
    }
}
