use contrastive::distributions::{gaussian_loglik_decomposition, Gaussian, LoglikDecomposition, Sampler};
use contrastive::rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{resolved, usage, Experiment};
use crate::config::typed;
use crate::output::{float, Output};
use crate::CliError;

/// Log-likelihood of the unnormalised Gaussian toy over a grid of scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FigLoglikConfig {
    /// Scale of the sampled data.
    pub sigma_true: f64,
    pub n: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub grid_points: usize,
    pub seed: u64,
}

impl Default for FigLoglikConfig {
    fn default() -> Self {
        Self { sigma_true: 2.0, n: 100, sigma_min: 0.25, sigma_max: 6.0, grid_points: 200, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoglikRow {
    pub sigma: f64,
    pub terms: LoglikDecomposition,
}

/// Rows over the σ grid and the closed-form maximiser `sqrt(Σx² / n)`.
pub fn loglik_grid(config: &FigLoglikConfig) -> Result<(Vec<LoglikRow>, f64), CliError> {
    if config.grid_points == 0 || config.n == 0 {
        return Err(usage("grid_points and n must be positive"));
    }
    if !(config.sigma_min > 0.0 && config.sigma_max >= config.sigma_min) {
        return Err(usage("need 0 < sigma_min <= sigma_max"));
    }
    let data = Gaussian::univariate(0.0, config.sigma_true)
        .map_err(|e| usage(e.to_string()))?
        .sample(config.n, rng::stream(config.seed, "data"));
    let xs = data.values();
    let mle = (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt();
    let step = if config.grid_points > 1 {
        (config.sigma_max - config.sigma_min) / (config.grid_points - 1) as f64
    } else {
        0.0
    };
    let rows = (0..config.grid_points)
        .map(|i| {
            let sigma = config.sigma_min + step * i as f64;
            Ok(LoglikRow { sigma, terms: gaussian_loglik_decomposition(sigma, xs).map_err(anyhow::Error::from)? })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((rows, mle))
}

pub struct FigLoglik;

impl Experiment for FigLoglik {
    fn description(&self) -> &'static str {
        "partition, energy and total log-likelihood of the Gaussian toy over sigma"
    }

    fn run(&self, config: Value, out: &mut Output) -> Result<Value, CliError> {
        let config: FigLoglikConfig = typed(config)?;
        let (rows, mle) = loglik_grid(&config)?;
        out.write("loglik.csv", |w| {
            writeln!(w, "sigma,partition_term,energy_term,total")?;
            for r in &rows {
                let t = r.terms;
                writeln!(
                    w,
                    "{},{},{},{}",
                    float(r.sigma),
                    float(t.partition_term),
                    float(t.energy_term),
                    float(t.total)
                )?;
            }
            Ok(())
        })?;
        let argmax = rows.iter().max_by(|a, b| a.terms.total.total_cmp(&b.terms.total)).map(|r| r.sigma);
        out.write_json("summary.json", &json!({ "sigma_mle": mle, "argmax_sigma": argmax }))?;
        resolved(&config)
    }
}
