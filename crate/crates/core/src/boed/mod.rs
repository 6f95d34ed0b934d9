//! Bayesian experimental design by maximising the Jensen–Shannon lower bound
//! `2 log 2 − J(h)` jointly over the design `d` and the ratio `h`, where the
//! logistic loss contrasts `p(x, θ | d)` with `p(x | d) p(θ)`.

mod experiment;
mod oracle;
mod sir;
mod strategy;

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use experiment::{sir_design_experiment, OracleSettings, PosteriorCheck, SirExperiment, SirExperimentConfig};
pub use oracle::{
    linear_gaussian_jsd, linear_gaussian_mi, linear_gaussian_oracle_ratio, nested_mc_mi_oracle, BinnedSir,
    ConditionalDensity, LinearGaussianObservation, MiEstimate, ObservationModel,
};
pub use sir::{sir_trajectory, SirAudit, SirConfig, SirSimulator, SirState};
pub use strategy::{strategies, AlternatingAscent, DesignStrategy, GridRefit};

use crate::error::{Error, Result};
use crate::optimize::OptimizerConfig;
use crate::points::Points;
use crate::ratio::{
    family_by_name, logistic_loss_with_gradient, LabeledTwoSample, LogRatioModel, Mlp, Standardize, TWO_LN_2,
};
use crate::rng;
use crate::sbi::{marginal_pairs, posterior_from_ratio, simulate_joint, PosteriorGrid, Prior, Simulator};

/// A design inside the box `[lower, upper]^q`, optionally non-decreasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignVector {
    values: Vec<f64>,
    lower: f64,
    upper: f64,
    ordered: bool,
}

impl DesignVector {
    pub fn new(values: Vec<f64>, lower: f64, upper: f64, ordered: bool) -> Result<Self> {
        if values.iter().any(|v| !(lower..=upper).contains(v)) {
            return Err(Error::InvalidArgument(format!("design {values:?} outside [{lower}, {upper}]")));
        }
        if ordered && values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument(format!("design {values:?} must be non-decreasing")));
        }
        Ok(Self { values, lower, upper, ordered })
    }

    /// Clamps into the box and sorts if ordered.
    pub fn projected(mut values: Vec<f64>, lower: f64, upper: f64, ordered: bool) -> Self {
        values.iter_mut().for_each(|v| *v = v.clamp(lower, upper));
        if ordered {
            values.sort_by(f64::total_cmp);
        }
        Self { values, lower, upper, ordered }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// The box constraint plus the candidate grid used by grid search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    pub lower: f64,
    pub upper: f64,
    pub ordered: bool,
    pub grid: Vec<Vec<f64>>,
}

impl DesignSpace {
    pub fn new(lower: f64, upper: f64, ordered: bool, grid: Vec<Vec<f64>>) -> Result<Self> {
        if !(upper >= lower) || grid.is_empty() {
            return Err(Error::InvalidArgument("design space needs lower ≤ upper and a non-empty grid".into()));
        }
        let dim = grid[0].len();
        for g in &grid {
            if g.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: g.len() });
            }
            DesignVector::new(g.clone(), lower, upper, ordered)?;
        }
        Ok(Self { lower, upper, ordered, grid })
    }

    /// `count` equally spaced one-dimensional designs spanning the box.
    pub fn linspace(lower: f64, upper: f64, count: usize) -> Result<Self> {
        let grid = match count {
            0 => Vec::new(),
            1 => vec![vec![lower]],
            _ => (0..count).map(|i| vec![lower + (upper - lower) * i as f64 / (count - 1) as f64]).collect(),
        };
        Self::new(lower, upper, false, grid)
    }

    pub fn dim(&self) -> usize {
        self.grid[0].len()
    }

    pub fn project(&self, values: Vec<f64>) -> Vec<f64> {
        DesignVector::projected(values, self.lower, self.upper, self.ordered).values
    }
}

/// Builds the initial ratio model for a design from its training rows `[x, θ]`.
pub trait RatioFactory: Send + Sync {
    fn model(&self, training: &Points) -> Result<LogRatioModel>;
}

impl<F> RatioFactory for F
where
    F: Fn(&Points) -> Result<LogRatioModel> + Send + Sync,
{
    fn model(&self, training: &Points) -> Result<LogRatioModel> {
        self(training)
    }
}

/// A registered ratio family on standardised inputs; perceptrons start from
/// a seeded random initialisation, linear families from zero.
pub fn standardized_factory(name: &str, hidden: usize, seed: u64) -> impl RatioFactory {
    let name = name.to_string();
    move |training: &Points| {
        let inner = family_by_name(&name, training.dim(), hidden)?;
        let family = Arc::new(Standardize::fitted(inner, training)?);
        if name == "mlp" {
            LogRatioModel::new(family, Mlp::new(training.dim(), hidden.max(1)).initial_params(seed))
        } else {
            Ok(LogRatioModel::zeros(family))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignObjective {
    /// `2 log 2 − J(h)`.
    pub bound: f64,
    /// Gradient of the bound with respect to the ratio parameters.
    pub gradient: Vec<f64>,
    pub std_error: f64,
}

/// Joint and shuffled banks at `design`; equal seeds give common random numbers across designs.
pub fn design_banks(
    sim: &dyn Simulator,
    prior: &dyn Prior,
    design: &[f64],
    n: usize,
    seed: u64,
) -> Result<LabeledTwoSample> {
    let joint = simulate_joint(sim, prior, design, n, seed)?;
    let marginal = marginal_pairs(&joint, rng::stream(seed, "shuffle"))?;
    LabeledTwoSample::new(joint.concatenated()?, marginal.concatenated()?)
}

/// The JSD lower bound of `ratio` at `design` on `n` fresh joint/shuffled pairs.
pub fn jsd_design_objective(
    sim: &dyn Simulator,
    prior: &dyn Prior,
    design: &[f64],
    ratio: &LogRatioModel,
    n: usize,
    seed: u64,
) -> Result<DesignObjective> {
    bound_on(ratio, &design_banks(sim, prior, design, n, seed)?)
}

pub fn bound_on(ratio: &LogRatioModel, sample: &LabeledTwoSample) -> Result<DesignObjective> {
    let report = logistic_loss_with_gradient(ratio, sample)?;
    Ok(DesignObjective {
        bound: TWO_LN_2 - report.loss,
        gradient: report.gradient.unwrap_or_default().iter().map(|g| -g).collect(),
        std_error: report.std_error,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiTraceEntry {
    pub iteration: usize,
    pub design: Vec<f64>,
    pub bound: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug)]
pub struct MiTrace {
    pub strategy: String,
    pub entries: Vec<MiTraceEntry>,
    pub final_design: Vec<f64>,
    pub final_bound: f64,
    pub final_std_error: f64,
    pub final_model: LogRatioModel,
    pub simulations: usize,
}

impl MiTrace {
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let dim = self.final_design.len();
        let mut header = vec!["iteration".to_string()];
        header.extend((0..dim).map(|j| format!("d_{j}")));
        header.extend(["bound".into(), "std_error".into()]);
        writeln!(out, "{}", header.join(","))?;
        for e in &self.entries {
            let mut cells = vec![e.iteration.to_string()];
            cells.extend(e.design.iter().map(|v| format!("{v:.16e}")));
            cells.push(format!("{:.16e}", e.bound));
            cells.push(format!("{:.16e}", e.std_error));
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategySettings {
    pub optimizer: OptimizerConfig,
    /// Pairs per bank for alternating ascent.
    pub bank_size: usize,
    /// Ratio optimiser iterations per alternating round.
    pub ratio_steps: usize,
    /// Design step per unit bound gradient.
    pub design_step: f64,
    /// Central-difference half-width for the design gradient.
    pub fd_step: f64,
    /// Starting design for alternating ascent; the middle grid point if absent.
    pub start: Option<Vec<f64>>,
}

impl Default for StrategySettings {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            bank_size: 5_000,
            ratio_steps: 20,
            design_step: 2.0,
            fd_step: 0.05,
            start: None,
        }
    }
}

/// Everything a design strategy needs besides its budget and seed.
pub struct DesignProblem<'a> {
    pub simulator: &'a dyn Simulator,
    pub prior: &'a dyn Prior,
    pub space: &'a DesignSpace,
    pub factory: &'a dyn RatioFactory,
    pub settings: StrategySettings,
}

/// Runs the named strategy with a budget counted in simulator calls.
pub fn concurrent_design_optimise(
    problem: &DesignProblem<'_>,
    strategy: &str,
    budget: usize,
    seed: u64,
) -> Result<MiTrace> {
    if problem.space.dim() != problem.simulator.design_dim() {
        return Err(Error::DimensionMismatch { expected: problem.simulator.design_dim(), found: problem.space.dim() });
    }
    strategies().get(strategy)?.optimise(problem, budget, seed)
}

/// The grid posterior implied by a ratio fitted at the chosen design.
pub fn posterior_at_design(
    ratio: &LogRatioModel,
    prior: &dyn Prior,
    x_obs: &[f64],
    resolution: usize,
) -> Result<PosteriorGrid> {
    posterior_from_ratio(ratio, prior, x_obs, resolution)
}
