use serde::{Deserialize, Serialize};

use super::oracle::{nested_mc_mi_oracle, BinnedSir, MiEstimate};
use super::sir::{SirConfig, SirSimulator};
use super::{
    concurrent_design_optimise, design_banks, posterior_at_design, standardized_factory, DesignProblem, DesignSpace,
    MiTrace, RatioFactory, StrategySettings,
};
use crate::error::Result;
use crate::optimize::OptimizerConfig;
use crate::ratio::fit_ratio;
use crate::rng;
use crate::sbi::{PosteriorGrid, Prior, Simulator};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    pub bins: usize,
    /// Simulations per histogram.
    pub replicates: usize,
    pub n_outer: usize,
    pub n_inner: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self { bins: 10, replicates: 200, n_outer: 300, n_inner: 300 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SirExperimentConfig {
    pub sir: SirConfig,
    /// Candidate single measurement times.
    pub times: Vec<f64>,
    pub strategy: String,
    /// Total simulator calls for the design search.
    pub budget: usize,
    pub ratio_family: String,
    pub hidden: usize,
    pub settings: StrategySettings,
    pub oracle: OracleSettings,
    /// Family refitted at the chosen design for the posterior.
    pub posterior_family: String,
    pub posterior_bank: usize,
    pub posterior_optimizer: OptimizerConfig,
    pub truth: (f64, f64),
    /// Observed data sets simulated at the truth.
    pub replicates: usize,
    pub posterior_resolution: usize,
    pub seed: u64,
}

impl Default for SirExperimentConfig {
    fn default() -> Self {
        Self {
            sir: SirConfig::default(),
            times: (1..=10).map(|k| 0.3 * k as f64).collect(),
            strategy: "grid-refit".into(),
            budget: 400_000,
            ratio_family: "quadratic".into(),
            hidden: 16,
            settings: StrategySettings::default(),
            oracle: OracleSettings::default(),
            posterior_family: "mlp".into(),
            posterior_bank: 20_000,
            posterior_optimizer: OptimizerConfig { max_iters: 500, ..Default::default() },
            truth: (2.0, 0.3),
            replicates: 20,
            posterior_resolution: 60,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorCheck {
    pub replicate: usize,
    pub x_obs: Vec<f64>,
    pub mode: Vec<f64>,
    pub mean: Vec<f64>,
    /// Distances to the truth in prior standard deviations.
    pub mode_distance: f64,
    pub mean_distance: f64,
    pub prior_mean_distance: f64,
}

#[derive(Clone, Debug)]
pub struct SirExperiment {
    pub posterior_model: crate::ratio::LogRatioModel,
    pub trace: MiTrace,
    pub oracle: Vec<MiEstimate>,
    pub oracle_argmax: usize,
    pub chosen_index: usize,
    pub checks: Vec<PosteriorCheck>,
    /// Posterior of the first replicate.
    pub posterior: PosteriorGrid,
    /// Every SIR trajectory simulated by the experiment.
    pub trajectories: u64,
    /// Those that violated `S + I + R = N`.
    pub conservation_violations: u64,
}

fn standardised_distance(a: &[f64], b: &[f64], sd: &[f64]) -> f64 {
    a.iter().zip(b).zip(sd).map(|((x, y), s)| ((x - y) / s).powi(2)).sum::<f64>().sqrt()
}

/// Single-time SIR design: strategy search, nested-MC oracle on the same
/// grid, and posteriors at the chosen time for data simulated at the truth.
pub fn sir_design_experiment(config: &SirExperimentConfig) -> Result<SirExperiment> {
    let sim = SirSimulator::new(config.sir.clone(), 1)?;
    let prior = config.sir.prior()?;
    let space = DesignSpace::new(0.0, config.sir.horizon, false, config.times.iter().map(|t| vec![*t]).collect())?;
    let factory = standardized_factory(&config.ratio_family, config.hidden, rng::stream(config.seed, "init"));
    let problem = DesignProblem {
        simulator: &sim,
        prior: &prior,
        space: &space,
        factory: &factory,
        settings: config.settings.clone(),
    };
    let trace =
        concurrent_design_optimise(&problem, &config.strategy, config.budget, rng::stream(config.seed, "design"))?;

    let binned = BinnedSir::new(sim.clone(), config.oracle.bins, config.oracle.replicates);
    let oracle_seed = rng::stream(config.seed, "oracle");
    let oracle = space
        .grid
        .iter()
        .map(|d| nested_mc_mi_oracle(&binned, &prior, d, config.oracle.n_outer, config.oracle.n_inner, oracle_seed))
        .collect::<Result<Vec<_>>>()?;
    let oracle_argmax = oracle
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, m)| if m.mi > acc.1 { (i, m.mi) } else { acc })
        .0;
    let chosen_index = space.grid.iter().position(|d| *d == trace.final_design).unwrap_or(0);

    let bank = Arc::new(design_banks(
        &sim,
        &prior,
        &trace.final_design,
        config.posterior_bank,
        rng::stream(config.seed, "posterior"),
    )?);
    let posterior_factory =
        standardized_factory(&config.posterior_family, config.hidden, rng::stream(config.seed, "posterior-init"));
    let init = posterior_factory.model(bank.data())?;
    let posterior_model = fit_ratio(&init, bank, &config.posterior_optimizer)?.model;

    let support = prior.support();
    let prior_mean: Vec<f64> = support.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    let prior_sd: Vec<f64> = support.iter().map(|(lo, hi)| (hi - lo) / 12f64.sqrt()).collect();
    let truth = [config.truth.0, config.truth.1];
    let obs_seed = rng::stream(config.seed, "observation");
    let mut checks = Vec::with_capacity(config.replicates);
    let mut first = None;
    for replicate in 0..config.replicates {
        let seed = rng::derive(obs_seed, replicate as u64);
        let x_obs = sim.run(&truth, &trace.final_design, seed)?;
        let posterior = posterior_at_design(&posterior_model, &prior, &x_obs, config.posterior_resolution)?;
        let mode = posterior.mode();
        checks.push(PosteriorCheck {
            replicate,
            mode_distance: standardised_distance(&mode, &truth, &prior_sd),
            mean_distance: standardised_distance(&posterior.mean(), &truth, &prior_sd),
            prior_mean_distance: standardised_distance(&prior_mean, &truth, &prior_sd),
            mean: posterior.mean(),
            mode,
            x_obs,
        });
        first.get_or_insert(posterior);
    }
    Ok(SirExperiment {
        posterior_model,
        trace,
        oracle,
        oracle_argmax,
        chosen_index,
        checks,
        posterior: first.expect("at least one replicate"),
        trajectories: sim.audit().trajectories(),
        conservation_violations: sim.audit().violations(),
    })
}
