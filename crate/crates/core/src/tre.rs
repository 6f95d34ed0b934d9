//! Telescoping density-ratio estimation and the density-chasm experiment.
//!
//! A large-gap log-ratio `log p_0 − log p_{K+1}` is written as the sum of
//! `K + 1` small-gap bridges `log p_k − log p_{k+1}` between waymark
//! distributions, each fitted separately by the logistic loss with `ν = 1`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{Gaussian, Sampler};
use crate::error::{Error, Result};
use crate::optimize::OptimizerConfig;
use crate::points::{median, Points};
use crate::ratio::{fit_ratio, LabeledTwoSample, LogRatioModel, LogisticObjective, RatioFamily};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaymarkScheme {
    /// `z_k = √(1 − a_k²) x + a_k y`.
    LinearCombination,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaymarkChain {
    schedule: Vec<f64>,
    waymarks: Vec<Points>,
    scheme: WaymarkScheme,
}

impl WaymarkChain {
    /// Number of intermediate waymarks.
    pub fn k(&self) -> usize {
        self.schedule.len() - 2
    }

    pub fn schedule(&self) -> &[f64] {
        &self.schedule
    }

    /// Waymark samples `p_0 (data), …, p_{K+1} (reference)`.
    pub fn waymarks(&self) -> &[Points] {
        &self.waymarks
    }

    pub fn scheme(&self) -> WaymarkScheme {
        self.scheme
    }

    pub fn n_bridges(&self) -> usize {
        self.waymarks.len() - 1
    }
}

/// The default schedule `a_k = k / (K + 1)`.
pub fn uniform_schedule(k: usize) -> Vec<f64> {
    (0..=k + 1).map(|i| i as f64 / (k + 1) as f64).collect()
}

/// Builds `K` linear-combination waymarks with the uniform schedule.
pub fn build_waymarks(data: &Points, reference: &Points, k: usize, seed: u64) -> Result<WaymarkChain> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "K = 0 has no intermediate waymarks; fit a single ratio directly instead".into(),
        ));
    }
    build_waymarks_with_schedule(data, reference, &uniform_schedule(k), seed)
}

pub fn build_waymarks_with_schedule(
    data: &Points,
    reference: &Points,
    schedule: &[f64],
    seed: u64,
) -> Result<WaymarkChain> {
    if schedule.len() < 3 {
        return Err(Error::InvalidArgument(
            "a chain needs at least one intermediate waymark; fit a single ratio directly instead".into(),
        ));
    }
    let valid = schedule[0] == 0.0 && *schedule.last().unwrap() == 1.0 && schedule.windows(2).all(|w| w[1] > w[0]);
    if !valid {
        return Err(Error::InvalidArgument(format!("schedule must increase strictly from 0 to 1, got {schedule:?}")));
    }
    if data.is_empty() || reference.is_empty() {
        return Err(Error::Empty("waymark endpoint samples"));
    }
    if data.dim() != reference.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), found: reference.dim() });
    }
    let n = data.len().min(reference.len());
    if data.len() != reference.len() {
        log::warn!(
            "waymark endpoints have {} and {} samples; pairing the first {n} after shuffling",
            data.len(),
            reference.len()
        );
    }
    let mut r = rng::rng(seed);
    let mut xi: Vec<usize> = (0..data.len()).collect();
    let mut yi: Vec<usize> = (0..reference.len()).collect();
    xi.shuffle(&mut r);
    yi.shuffle(&mut r);
    let xs = data.select(&xi[..n]);
    let ys = reference.select(&yi[..n]);

    let mut waymarks = Vec::with_capacity(schedule.len());
    waymarks.push(data.clone());
    for &a in &schedule[1..schedule.len() - 1] {
        let wx = (1.0 - a * a).sqrt();
        let mut z = Points::with_capacity(data.dim(), n);
        let mut row = vec![0.0; data.dim()];
        for (x, y) in xs.rows().zip(ys.rows()) {
            for ((o, xv), yv) in row.iter_mut().zip(x).zip(y) {
                *o = wx * xv + a * yv;
            }
            z.push(&row);
        }
        waymarks.push(z);
    }
    waymarks.push(reference.clone());
    Ok(WaymarkChain { schedule: schedule.to_vec(), waymarks, scheme: WaymarkScheme::LinearCombination })
}

/// Scale of waymark `a` when data ~ N(0, s_data² I) and reference ~ N(0, s_ref² I).
pub fn linear_combination_scale(a: f64, s_data: f64, s_ref: f64) -> f64 {
    ((1.0 - a * a) * s_data * s_data + a * a * s_ref * s_ref).sqrt()
}

pub use crate::ratio::RatioFit as BridgeFit;

#[derive(Clone, Debug)]
pub struct BridgeEstimate {
    bridges: Vec<BridgeFit>,
}

impl BridgeEstimate {
    pub fn new(bridges: Vec<BridgeFit>) -> Self {
        Self { bridges }
    }

    pub fn bridges(&self) -> &[BridgeFit] {
        &self.bridges
    }

    pub fn models(&self) -> impl Iterator<Item = &LogRatioModel> {
        self.bridges.iter().map(|b| &b.model)
    }

    /// `Σ_k h_k(x)`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.bridges.iter().map(|b| b.model.evaluate(x)).sum()
    }
}

/// Supplies the initial model for bridge `k` (between waymarks `k` and `k + 1`).
pub trait BridgeFactory: Send + Sync {
    fn model(&self, bridge: usize, chain: &WaymarkChain) -> Result<LogRatioModel>;
}

impl<F> BridgeFactory for F
where
    F: Fn(usize, &WaymarkChain) -> Result<LogRatioModel> + Send + Sync,
{
    fn model(&self, bridge: usize, chain: &WaymarkChain) -> Result<LogRatioModel> {
        self(bridge, chain)
    }
}

/// Fits one logistic-loss ratio to `(data, reference)` from `init`.
pub fn fit_pair(
    init: &LogRatioModel,
    data: &Points,
    reference: &Points,
    config: &OptimizerConfig,
) -> Result<BridgeFit> {
    fit_ratio(init, Arc::new(LabeledTwoSample::new(data.clone(), reference.clone())?), config)
}

/// Fits every bridge with `ν = 1`; the combined estimate is their sum.
pub fn tre_fit(chain: &WaymarkChain, factory: &dyn BridgeFactory, config: &OptimizerConfig) -> Result<BridgeEstimate> {
    let bridges = (0..chain.n_bridges())
        .into_par_iter()
        .map(|k| {
            let wrap = |source: Error| Error::BridgeFit { bridge: k, source: Box::new(source) };
            let init = factory.model(k, chain).map_err(wrap)?;
            let w = chain.waymarks();
            let (num, den) = (&w[k], &w[k + 1]);
            let n = num.len().min(den.len());
            let (mut num, mut den) = (num.clone(), den.clone());
            num.truncate(n);
            den.truncate(n);
            fit_pair(&init, &num, &den, config).map_err(wrap)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BridgeEstimate::new(bridges))
}

/// `h(x; b) = −b ||x||² + (d/2) log(1 + 2 b s²)`: the exact log-ratio of
/// `N(0, σ² I)` to the reference `N(0, s² I)` at `b = 1/(2σ²) − 1/(2s²)`.
#[derive(Clone, Copy, PartialEq)]
pub struct ScaleFamily {
    dim: usize,
    reference_scale: f64,
}

impl fmt::Debug for ScaleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScaleFamily(d={}, s={})", self.dim, self.reference_scale)
    }
}

impl ScaleFamily {
    pub fn new(dim: usize, reference_scale: f64) -> Result<Self> {
        if dim == 0 || !(reference_scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scale family needs d ≥ 1 and s > 0, got d = {dim}, s = {reference_scale}"
            )));
        }
        Ok(Self { dim, reference_scale })
    }

    /// The parameter at which the family equals `log N(0, σ²) − log N(0, s²)`.
    pub fn true_parameter(&self, data_scale: f64) -> f64 {
        0.5 / (data_scale * data_scale) - 0.5 / (self.reference_scale * self.reference_scale)
    }
}

impl RatioFamily for ScaleFamily {
    fn describe(&self) -> String {
        format!("{self:?}")
    }

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn n_params(&self) -> usize {
        1
    }

    fn value(&self, params: &[f64], x: &[f64]) -> f64 {
        let s2 = self.reference_scale * self.reference_scale;
        let sq: f64 = x.iter().map(|v| v * v).sum();
        -params[0] * sq + 0.5 * self.dim as f64 * (2.0 * params[0] * s2).ln_1p()
    }

    fn value_and_gradient(&self, params: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let s2 = self.reference_scale * self.reference_scale;
        let sq: f64 = x.iter().map(|v| v * v).sum();
        let inner = 1.0 + 2.0 * params[0] * s2;
        grad[0] = -sq + self.dim as f64 * s2 / inner;
        -params[0] * sq + 0.5 * self.dim as f64 * inner.ln()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChasmConfig {
    pub alphas: Vec<f64>,
    pub dim: usize,
    /// Samples per distribution.
    pub n: usize,
    /// Intermediate waymarks for the telescoping estimator.
    pub k: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Step of the second difference used as the curvature proxy.
    pub curvature_step: f64,
    pub optimizer: OptimizerConfig,
}

impl Default for ChasmConfig {
    fn default() -> Self {
        Self {
            alphas: vec![2.0, 4.0, 8.0],
            dim: 10,
            n: 10_000,
            k: 8,
            replicates: 20,
            seed: 0,
            curvature_step: 1e-3,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChasmMethod {
    Single,
    Tre,
}

impl fmt::Display for ChasmMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Single => "single",
            Self::Tre => "tre",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChasmRow {
    pub alpha: f64,
    pub seed: u64,
    pub method: ChasmMethod,
    pub k: usize,
    /// Estimated minus true parameter of the combined ratio.
    pub param_error: f64,
    /// Second difference of the loss at the optimum; for TRE the mean over bridges.
    pub curvature_proxy: f64,
    /// For TRE the sum of bridge losses.
    pub final_loss: f64,
}

pub const CHASM_CSV_HEADER: &str = "alpha,seed,method,K,param_error,curvature_proxy,final_loss";

impl ChasmRow {
    pub fn csv(&self) -> String {
        format!(
            "{:.16e},{},{},{},{:.16e},{:.16e},{:.16e}",
            self.alpha, self.seed, self.method, self.k, self.param_error, self.curvature_proxy, self.final_loss
        )
    }
}

pub fn write_chasm_csv(rows: &[ChasmRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "{CHASM_CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv())?;
    }
    Ok(())
}

/// Second difference of the logistic loss along the single parameter.
pub fn curvature_proxy(fit: &BridgeFit, data: &Points, reference: &Points, step: f64) -> Result<f64> {
    let sample = Arc::new(LabeledTwoSample::new(data.clone(), reference.clone())?);
    let objective = LogisticObjective::new(Arc::clone(fit.model.family()), sample)?;
    let b = fit.model.params()[0];
    let at = |v: f64| objective.report(&[v]).loss;
    Ok((at(b + step) - 2.0 * at(b) + at(b - step)) / (step * step))
}

fn chasm_replicate(config: &ChasmConfig, alpha: f64, seed: u64) -> Result<[ChasmRow; 2]> {
    let d = config.dim;
    let data = Gaussian::isotropic(d, 1.0)?.sample(config.n, rng::stream(seed, "data"));
    let reference = Gaussian::isotropic(d, alpha)?.sample(config.n, rng::stream(seed, "reference"));

    let family = ScaleFamily::new(d, alpha)?;
    let truth = family.true_parameter(1.0);
    let single = fit_pair(&LogRatioModel::zeros(Arc::new(family)), &data, &reference, &config.optimizer)?;
    let single_row = ChasmRow {
        alpha,
        seed,
        method: ChasmMethod::Single,
        k: 0,
        param_error: single.model.params()[0] - truth,
        curvature_proxy: curvature_proxy(&single, &data, &reference, config.curvature_step)?,
        final_loss: single.final_loss,
    };

    let chain = build_waymarks(&data, &reference, config.k, rng::stream(seed, "waymarks"))?;
    let factory = |k: usize, chain: &WaymarkChain| -> Result<LogRatioModel> {
        let s = linear_combination_scale(chain.schedule()[k + 1], 1.0, alpha);
        Ok(LogRatioModel::zeros(Arc::new(ScaleFamily::new(d, s)?)))
    };
    let tre = tre_fit(&chain, &factory, &config.optimizer)?;
    let combined: f64 = tre.models().map(|m| m.params()[0]).sum();
    let mut curvatures = Vec::with_capacity(chain.n_bridges());
    for (k, bridge) in tre.bridges().iter().enumerate() {
        let w = chain.waymarks();
        let n = w[k].len().min(w[k + 1].len());
        let (mut num, mut den) = (w[k].clone(), w[k + 1].clone());
        num.truncate(n);
        den.truncate(n);
        curvatures.push(curvature_proxy(bridge, &num, &den, config.curvature_step)?);
    }
    let tre_row = ChasmRow {
        alpha,
        seed,
        method: ChasmMethod::Tre,
        k: config.k,
        param_error: combined - truth,
        curvature_proxy: curvatures.iter().sum::<f64>() / curvatures.len() as f64,
        final_loss: tre.bridges().iter().map(|b| b.final_loss).sum(),
    };
    Ok([single_row, tre_row])
}

/// Single-ratio and telescoping fits of `N(0, I_d)` against `N(0, α² I_d)`
/// for every `α` and replicate, in `(alpha, replicate, method)` order.
pub fn chasm_experiment(config: &ChasmConfig) -> Result<Vec<ChasmRow>> {
    if config.alphas.iter().any(|a| !(*a > 0.0)) || config.dim == 0 || config.n == 0 || config.replicates == 0 {
        return Err(Error::InvalidArgument(format!("invalid chasm configuration {config:?}")));
    }
    let jobs: Vec<(f64, u64)> = config
        .alphas
        .iter()
        .flat_map(|&a| (0..config.replicates as u64).map(move |r| (a, rng::derive(config.seed, r))))
        .collect();
    let rows =
        jobs.par_iter().map(|&(alpha, seed)| chasm_replicate(config, alpha, seed)).collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChasmSummary {
    pub alpha: f64,
    pub median_curvature_single: f64,
    pub median_abs_error_single: f64,
    pub median_abs_error_tre: f64,
}

/// Per-`α` medians over replicates.
pub fn summarise_chasm(rows: &[ChasmRow]) -> Vec<ChasmSummary> {
    let mut alphas: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
    alphas.dedup();
    alphas
        .into_iter()
        .map(|alpha| {
            let pick = |method: ChasmMethod, f: fn(&ChasmRow) -> f64| -> Vec<f64> {
                rows.iter().filter(|r| r.alpha == alpha && r.method == method).map(f).collect()
            };
            ChasmSummary {
                alpha,
                median_curvature_single: median(&pick(ChasmMethod::Single, |r| r.curvature_proxy)),
                median_abs_error_single: median(&pick(ChasmMethod::Single, |r| r.param_error.abs())),
                median_abs_error_tre: median(&pick(ChasmMethod::Tre, |r| r.param_error.abs())),
            }
        })
        .collect()
}
