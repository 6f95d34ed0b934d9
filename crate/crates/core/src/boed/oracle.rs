//! Reference values for design objectives: closed forms for the
//! linear-Gaussian model and nested Monte Carlo mutual information.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sir::SirSimulator;
use crate::distributions::{jsd_quadrature, Density, Gaussian, LN_2PI};
use crate::error::{Error, Result};
use crate::points::{log_sum_exp, mean_and_se};
use crate::quadrature::Integrator;
use crate::ratio::LogRatioModel;
use crate::rng;
use crate::sbi::{Prior, Simulator};

/// `½ log(1 + d²)` for `x = d θ + ε` with standard normal `θ, ε`.
pub fn linear_gaussian_mi(d: f64) -> f64 {
    0.5 * (d * d).ln_1p()
}

/// `log N(x; d θ, 1) − log N(x; 0, 1 + d²)` on `[x, θ]` rows.
pub fn linear_gaussian_oracle_ratio(d: f64) -> LogRatioModel {
    LogRatioModel::fixed(2, move |z| {
        let (x, t) = (z[0], z[1]);
        let v = 1.0 + d * d;
        -0.5 * (x - d * t).powi(2) + 0.5 * x * x / v + 0.5 * v.ln()
    })
}

/// Jensen–Shannon divergence between `p(x, θ | d)` and `p(x | d) p(θ)` by 2-D quadrature.
pub fn linear_gaussian_jsd(d: f64) -> Result<f64> {
    let sx = (1.0 + d * d).sqrt();
    let prior = Gaussian::standard(1);
    let marginal = Gaussian::univariate(0.0, sx)?;
    let log_joint = move |z: &[f64]| prior.log_density(&z[1..]) - 0.5 * (LN_2PI + (z[0] - d * z[1]).powi(2));
    let log_product = move |z: &[f64]| marginal.log_density(&z[..1]) + Gaussian::standard(1).log_density(&z[1..]);
    let integrator = Integrator::rectangle((-12.0 * sx, 12.0 * sx), (-12.0, 12.0));
    jsd_quadrature(&log_joint, &log_product, &integrator)
}

/// `p(x | θ, d)` for one fixed `(θ, d)`.
pub trait ConditionalDensity: Send + Sync {
    fn log_density(&self, x: &[f64]) -> f64;
}

/// An observation process whose conditional density can be evaluated,
/// either analytically or through a discretised observation space.
pub trait ObservationModel: Send + Sync {
    fn sample(&self, theta: &[f64], design: &[f64], seed: u64) -> Result<Vec<f64>>;
    fn conditional(&self, theta: &[f64], design: &[f64], seed: u64) -> Result<Arc<dyn ConditionalDensity>>;
}

/// `x = d θ + ε`, `ε ~ N(0, 1)`, with its exact conditional density.
#[derive(Clone, Copy, Debug, Default)]
pub struct LinearGaussianObservation;

struct NormalConditional(f64);

impl ConditionalDensity for NormalConditional {
    fn log_density(&self, x: &[f64]) -> f64 {
        -0.5 * (LN_2PI + (x[0] - self.0).powi(2))
    }
}

impl ObservationModel for LinearGaussianObservation {
    fn sample(&self, theta: &[f64], design: &[f64], seed: u64) -> Result<Vec<f64>> {
        crate::sbi::LinearGaussianSimulator::default().run(theta, design, seed)
    }

    fn conditional(&self, theta: &[f64], design: &[f64], _seed: u64) -> Result<Arc<dyn ConditionalDensity>> {
        let d = design.first().copied().unwrap_or(1.0);
        Ok(Arc::new(NormalConditional(d * theta[0])))
    }
}

/// SIR observations coarsened to a `bins`-per-coordinate grid on `[0, 1]`;
/// `p(bin | θ)` is a smoothed histogram of `replicates` simulations.
#[derive(Clone, Debug)]
pub struct BinnedSir {
    pub simulator: SirSimulator,
    pub bins: usize,
    pub replicates: usize,
    /// Pseudo-count added to every cell.
    pub smoothing: f64,
}

impl BinnedSir {
    pub fn new(simulator: SirSimulator, bins: usize, replicates: usize) -> Self {
        Self { simulator, bins, replicates, smoothing: 0.5 }
    }
}

fn cell_index(x: &[f64], bins: usize) -> usize {
    x.iter().fold(0, |acc, v| acc * bins + ((v * bins as f64) as usize).min(bins - 1))
}

struct Histogram {
    log_probs: Vec<f64>,
    bins: usize,
}

impl ConditionalDensity for Histogram {
    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_probs[cell_index(x, self.bins)]
    }
}

impl ObservationModel for BinnedSir {
    fn sample(&self, theta: &[f64], design: &[f64], seed: u64) -> Result<Vec<f64>> {
        self.simulator.run(theta, design, seed)
    }

    fn conditional(&self, theta: &[f64], design: &[f64], seed: u64) -> Result<Arc<dyn ConditionalDensity>> {
        let cells = self.bins.pow(self.simulator.data_dim() as u32);
        let mut counts = vec![self.smoothing; cells];
        for rep in 0..self.replicates {
            let x = self.simulator.run(theta, design, rng::derive(seed, rep as u64))?;
            counts[cell_index(&x, self.bins)] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        let log_probs = counts.iter().map(|c| (c / total).ln()).collect();
        Ok(Arc::new(Histogram { log_probs, bins: self.bins }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    pub mi: f64,
    pub std_error: f64,
}

/// `E[log p(x | θ, d) − log p̂(x | d)]` with `p̂(x | d) = (1/n_inner) Σ_j p(x | θ_j, d)`
/// over an independent inner prior sample. Biased upward for finite `n_inner`.
pub fn nested_mc_mi_oracle(
    model: &dyn ObservationModel,
    prior: &dyn Prior,
    design: &[f64],
    n_outer: usize,
    n_inner: usize,
    seed: u64,
) -> Result<MiEstimate> {
    if n_outer < 2 || n_inner == 0 {
        return Err(Error::InvalidArgument("nested MC needs n_outer ≥ 2 and n_inner ≥ 1".into()));
    }
    let outer = prior.sample(n_outer, rng::stream(seed, "outer"));
    let inner = prior.sample(n_inner, rng::stream(seed, "inner"));
    let cond_seed = rng::stream(seed, "conditional");
    let inner_seed = rng::stream(seed, "inner-conditional");
    let inner_conds = (0..n_inner)
        .into_par_iter()
        .map(|j| model.conditional(inner.row(j), design, rng::derive(inner_seed, j as u64)))
        .collect::<Result<Vec<_>>>()?;
    let obs_seed = rng::stream(seed, "observation");
    let log_n = (n_inner as f64).ln();
    let terms = (0..n_outer)
        .into_par_iter()
        .map(|i| {
            let theta = outer.row(i);
            let x = model.sample(theta, design, rng::derive(obs_seed, i as u64))?;
            let own = model.conditional(theta, design, rng::derive(cond_seed, i as u64))?.log_density(&x);
            let logs: Vec<f64> = inner_conds.iter().map(|c| c.log_density(&x)).collect();
            Ok(own - (log_sum_exp(&logs) - log_n))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mi, std_error) = mean_and_se(&terms);
    Ok(MiEstimate { mi, std_error })
}
