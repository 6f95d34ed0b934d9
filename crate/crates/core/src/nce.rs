//! Noise-contrastive estimation of energy-based models.
//!
//! The log-ratio is parametrised as `h(x; θ, c) = −E(x; θ) − log q(x) + c`
//! so that fitting it by logistic regression against reference samples
//! from `q` estimates both the energy parameters and the log-normaliser:
//! the fitted density is `exp(ĉ) · exp(−E(x; θ̂))`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::{Density, Gaussian, ReferenceDistribution, LN_2PI};
use crate::error::{Error, Result};
use crate::optimize::{minimise, OptimizerConfig, Termination};
use crate::points::{mean_and_se, Points};
use crate::ratio::{logistic_loss_with_gradient, LabeledTwoSample, LogRatioModel, LogisticObjective, RatioFamily};
use crate::rng;

/// An unnormalised model `φ(x; θ) = exp(−E(x; θ))`.
pub trait EnergyModel: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn n_params(&self) -> usize;
    fn energy(&self, x: &[f64], theta: &[f64]) -> f64;
    /// Writes `∇_θ E(x; θ)` into `grad` and returns `E(x; θ)`.
    fn energy_and_gradient(&self, x: &[f64], theta: &[f64], grad: &mut [f64]) -> f64;

    fn log_partition(&self, _theta: &[f64]) -> Option<f64> {
        None
    }

    fn log_partition_gradient(&self, _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// The normalised model as an exact sampler, when one exists.
    fn normalised(&self, _theta: &[f64]) -> Option<Arc<dyn ReferenceDistribution>> {
        None
    }
}

/// `E(x; σ) = ||x||² / (2σ²)` on `R^dim`, with `θ = [σ]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianEnergy {
    pub dim: usize,
}

impl GaussianEnergy {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl EnergyModel for GaussianEnergy {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_params(&self) -> usize {
        1
    }

    fn energy(&self, x: &[f64], theta: &[f64]) -> f64 {
        let sq: f64 = x.iter().map(|v| v * v).sum();
        sq / (2.0 * theta[0] * theta[0])
    }

    fn energy_and_gradient(&self, x: &[f64], theta: &[f64], grad: &mut [f64]) -> f64 {
        let s = theta[0];
        let sq: f64 = x.iter().map(|v| v * v).sum();
        grad[0] = -sq / (s * s * s);
        sq / (2.0 * s * s)
    }

    fn log_partition(&self, theta: &[f64]) -> Option<f64> {
        let s = theta[0];
        (s > 0.0).then(|| 0.5 * self.dim as f64 * (LN_2PI + 2.0 * s.ln()))
    }

    fn log_partition_gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        (theta[0] > 0.0).then(|| vec![self.dim as f64 / theta[0]])
    }

    fn normalised(&self, theta: &[f64]) -> Option<Arc<dyn ReferenceDistribution>> {
        Gaussian::isotropic(self.dim, theta[0]).ok().map(|g| Arc::new(g) as Arc<dyn ReferenceDistribution>)
    }
}

/// `k · φ(x; θ)`, i.e. the energy shifted by `−log k`.
#[derive(Clone, Debug)]
pub struct ScaledEnergy {
    inner: Arc<dyn EnergyModel>,
    log_k: f64,
}

impl ScaledEnergy {
    pub fn new(inner: Arc<dyn EnergyModel>, log_k: f64) -> Self {
        Self { inner, log_k }
    }
}

impl EnergyModel for ScaledEnergy {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn n_params(&self) -> usize {
        self.inner.n_params()
    }
    fn energy(&self, x: &[f64], theta: &[f64]) -> f64 {
        self.inner.energy(x, theta) - self.log_k
    }
    fn energy_and_gradient(&self, x: &[f64], theta: &[f64], grad: &mut [f64]) -> f64 {
        self.inner.energy_and_gradient(x, theta, grad) - self.log_k
    }
    fn log_partition(&self, theta: &[f64]) -> Option<f64> {
        self.inner.log_partition(theta).map(|z| z + self.log_k)
    }
    fn log_partition_gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        self.inner.log_partition_gradient(theta)
    }
    fn normalised(&self, theta: &[f64]) -> Option<Arc<dyn ReferenceDistribution>> {
        self.inner.normalised(theta)
    }
}

/// `h(x; θ, c) = −E(x; θ) − log q(x) + c` over parameters `[θ..., c]`.
#[derive(Clone)]
pub struct NceRatio {
    model: Arc<dyn EnergyModel>,
    reference: Arc<dyn Density>,
}

impl fmt::Debug for NceRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NceRatio").field("model", &self.model).finish_non_exhaustive()
    }
}

impl NceRatio {
    pub fn new(model: Arc<dyn EnergyModel>, reference: Arc<dyn Density>) -> Result<Self> {
        if model.dim() != reference.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), found: reference.dim() });
        }
        Ok(Self { model, reference })
    }
}

impl RatioFamily for NceRatio {
    fn describe(&self) -> String {
        format!("nce log-ratio for {:?}", self.model)
    }

    fn input_dim(&self) -> usize {
        self.model.dim()
    }

    fn n_params(&self) -> usize {
        self.model.n_params() + 1
    }

    fn value(&self, params: &[f64], x: &[f64]) -> f64 {
        let (theta, c) = params.split_at(self.model.n_params());
        -self.model.energy(x, theta) - self.reference.log_density(x) + c[0]
    }

    fn value_and_gradient(&self, params: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let k = self.model.n_params();
        let (theta, c) = params.split_at(k);
        let e = self.model.energy_and_gradient(x, theta, &mut grad[..k]);
        grad[..k].iter_mut().for_each(|g| *g = -*g);
        grad[k] = 1.0;
        -e - self.reference.log_density(x) + c[0]
    }
}

/// The NCE log-ratio model at parameters `(θ, c)`.
pub fn nce_ratio_model(
    model: Arc<dyn EnergyModel>,
    reference: Arc<dyn Density>,
    theta: &[f64],
    c: f64,
) -> Result<LogRatioModel> {
    let family = NceRatio::new(Arc::clone(&model), reference)?;
    if theta.len() != model.n_params() {
        return Err(Error::DimensionMismatch { expected: model.n_params(), found: theta.len() });
    }
    let mut params = theta.to_vec();
    params.push(c);
    LogRatioModel::new(Arc::new(family), params)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NceConfig {
    /// Reference-to-data sample ratio; `m = round(ν n)`.
    pub nu: f64,
    pub init_theta: Vec<f64>,
    pub init_c: f64,
    pub optimizer: OptimizerConfig,
    /// Seed of the reference sample.
    pub seed: u64,
}

impl Default for NceConfig {
    fn default() -> Self {
        Self { nu: 10.0, init_theta: vec![1.0], init_c: 0.0, optimizer: OptimizerConfig::default(), seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NceEstimate {
    pub theta_hat: Vec<f64>,
    pub c_hat: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_loss_se: f64,
    /// `(iteration, loss)` pairs.
    pub trajectory: Vec<(usize, f64)>,
    pub n: usize,
    pub m: usize,
    pub nu: f64,
    pub reference_seed: u64,
    pub termination: Termination,
}

impl NceEstimate {
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.theta_hat.clone();
        p.push(self.c_hat);
        p
    }
}

fn reference_count(n: usize, nu: f64) -> Result<usize> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidArgument(format!("nu must be positive, got {nu}")));
    }
    Ok(((nu * n as f64).round() as usize).max(1))
}

fn fit_on_sample(
    model: &Arc<dyn EnergyModel>,
    reference: Arc<dyn Density>,
    sample: LabeledTwoSample,
    init: &[f64],
    optimizer: &OptimizerConfig,
    reference_seed: u64,
) -> Result<NceEstimate> {
    let family: Arc<dyn RatioFamily> = Arc::new(NceRatio::new(Arc::clone(model), reference)?);
    let (n, m, nu) = (sample.data().len(), sample.reference().len(), sample.nu());
    let objective = LogisticObjective::new(family, Arc::new(sample))?;
    let min = minimise(&objective, init, optimizer)?;
    let k = model.n_params();
    let report = objective.report(&min.argmin);
    Ok(NceEstimate {
        theta_hat: min.argmin[..k].to_vec(),
        c_hat: min.argmin[k],
        initial_loss: min.trace.first().map_or(f64::NAN, |t| t.value),
        final_loss: report.loss,
        final_loss_se: report.std_error,
        trajectory: min.trace.iter().map(|t| (t.iteration, t.value)).collect(),
        n,
        m,
        nu,
        reference_seed,
        termination: min.termination,
    })
}

/// Fits `(θ, c)` by minimising the logistic loss of data against
/// `m = round(ν n)` reference draws.
pub fn nce_fit(
    model: Arc<dyn EnergyModel>,
    data: &Points,
    reference: Arc<dyn ReferenceDistribution>,
    config: &NceConfig,
) -> Result<NceEstimate> {
    if data.is_empty() {
        return Err(Error::Empty("data"));
    }
    if config.init_theta.len() != model.n_params() {
        return Err(Error::DimensionMismatch { expected: model.n_params(), found: config.init_theta.len() });
    }
    let m = reference_count(data.len(), config.nu)?;
    let reference_seed = rng::stream(config.seed, "reference");
    let sample = LabeledTwoSample::new(data.clone(), reference.sample(m, reference_seed))?;
    let mut init = config.init_theta.clone();
    init.push(config.init_c);
    let density: Arc<dyn Density> = Arc::new(AsDensity(reference));
    fit_on_sample(&model, density, sample, &init, &config.optimizer, reference_seed)
}

#[derive(Debug)]
struct AsDensity(Arc<dyn ReferenceDistribution>);

impl Density for AsDensity {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        self.0.log_density(x)
    }
}

/// Balanced classification accuracy of `h > 0` for data vs reference;
/// ties count as half correct.
pub fn classification_accuracy(model: &LogRatioModel, data: &Points, reference: &Points) -> f64 {
    let score = |h: f64, positive: bool| {
        if h == 0.0 {
            0.5
        } else if (h > 0.0) == positive {
            1.0
        } else {
            0.0
        }
    };
    let d: f64 = data.rows().map(|x| score(model.evaluate(x), true)).sum::<f64>() / data.len() as f64;
    let r: f64 = reference.rows().map(|y| score(model.evaluate(y), false)).sum::<f64>() / reference.len() as f64;
    0.5 * (d + r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NceRound {
    pub round: usize,
    /// Balanced held-out accuracy of the current `h` against the round's reference.
    pub start_accuracy: f64,
    pub estimate: NceEstimate,
}

/// NCE where each round's reference is the normalised model fitted in the
/// previous round. `config.optimizer.max_iters` is the per-round step budget.
pub fn iterative_nce(
    model: Arc<dyn EnergyModel>,
    data: &Points,
    initial_reference: Arc<dyn ReferenceDistribution>,
    rounds: usize,
    config: &NceConfig,
) -> Result<Vec<NceRound>> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("at least one round is required".into()));
    }
    if model.normalised(&config.init_theta).is_none() {
        return Err(Error::InvalidArgument("iterative NCE needs a model family with an exact sampler".into()));
    }
    let m = reference_count(data.len(), config.nu)?;
    let mut params = config.init_theta.clone();
    params.push(config.init_c);
    let mut reference = initial_reference;
    let mut out = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let round_seed = rng::derive(config.seed, round as u64);
        let density: Arc<dyn Density> = Arc::new(AsDensity(Arc::clone(&reference)));
        let current =
            LogRatioModel::new(Arc::new(NceRatio::new(Arc::clone(&model), Arc::clone(&density))?), params.clone())?;
        let held_out = reference.sample(data.len(), rng::stream(round_seed, "held-out"));
        let start_accuracy = classification_accuracy(&current, data, &held_out);

        let reference_seed = rng::stream(round_seed, "reference");
        let sample = LabeledTwoSample::new(data.clone(), reference.sample(m, reference_seed))?;
        let estimate = fit_on_sample(&model, density, sample, &params, &config.optimizer, reference_seed)?;
        params = estimate.params();
        reference = model
            .normalised(&estimate.theta_hat)
            .ok_or_else(|| Error::InvalidArgument(format!("no sampler at theta {:?}", estimate.theta_hat)))?;
        out.push(NceRound { round, start_accuracy, estimate });
    }
    Ok(out)
}

/// `−ν e^{−h} / (1 + ν e^{−h})`, the data-point weight of the NCE gradient.
pub fn nce_data_weight(h: f64, nu: f64) -> f64 {
    let z = nu.ln() - h;
    -if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { z.exp() / (1.0 + z.exp()) }
}

/// `e^{h} / (1 + e^{h} / ν)`, the reference-point weight of the NCE gradient.
pub fn nce_reference_weight(h: f64, nu: f64) -> f64 {
    let z = h - nu.ln();
    nu * if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { z.exp() / (1.0 + z.exp()) }
}

fn grad_log_phi(model: &dyn EnergyModel, x: &[f64], theta: &[f64], buf: &mut [f64]) {
    model.energy_and_gradient(x, theta, buf);
    buf.iter_mut().for_each(|g| *g = -*g);
}

fn mean_grad_log_phi(model: &dyn EnergyModel, points: &Points, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = model.n_params();
    let mut buf = vec![0.0; k];
    let mut columns = vec![Vec::with_capacity(points.len()); k];
    for x in points.rows() {
        grad_log_phi(model, x, theta, &mut buf);
        for (c, g) in columns.iter_mut().zip(&buf) {
            c.push(*g);
        }
    }
    columns.iter().map(|c| mean_and_se(c)).unzip()
}

/// Outcome of comparing the NCE gradient under the current-model reference
/// with the negative log-likelihood gradient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub theta: Vec<f64>,
    pub c: f64,
    /// `c + log Z(θ_t)`.
    pub b_t: f64,
    pub nu: f64,
    pub scale: f64,
    pub nce_gradient: Vec<f64>,
    /// `−(mean ∇log φ(x_i) − mean ∇log φ(y_j))` over the same reference draws.
    pub mc_neg_loglik_gradient: Vec<f64>,
    /// `−(mean ∇log φ(x_i) − ∇log Z(θ_t))`.
    pub exact_neg_loglik_gradient: Vec<f64>,
    /// Monte Carlo standard error of `scale · mc_neg_loglik_gradient`.
    pub std_error: Vec<f64>,
    /// `max |nce − scale · mc|`; zero up to rounding when `b_t = 0`.
    pub identity_residual: f64,
    /// `None` when `b_t ≠ 0` and the comparison was skipped.
    pub agrees: Option<bool>,
}

/// Tolerance on `|b_t|` below which the model counts as normalised.
pub const B_T_TOLERANCE: f64 = 1e-9;

/// NCE gradient at `θ_t` with reference `p(·; θ_t)` and log-scale `c`,
/// against `ν/(1+ν)` times the negative log-likelihood gradient.
pub fn mle_gradient_equivalence_check(
    model: Arc<dyn EnergyModel>,
    data: &Points,
    theta_t: &[f64],
    c: f64,
    m: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    if data.is_empty() || m == 0 {
        return Err(Error::Empty("data or reference sample"));
    }
    let reference =
        model.normalised(theta_t).ok_or_else(|| Error::InvalidArgument("model has no exact sampler".into()))?;
    let log_z = model
        .log_partition(theta_t)
        .ok_or_else(|| Error::InvalidArgument("model has no analytic partition function".into()))?;
    let grad_log_z = model
        .log_partition_gradient(theta_t)
        .ok_or_else(|| Error::InvalidArgument("model has no analytic partition gradient".into()))?;
    let ys = reference.sample(m, rng::stream(seed, "model-reference"));
    let sample = LabeledTwoSample::new(data.clone(), ys.clone())?;
    let nu = sample.nu();
    let density: Arc<dyn Density> = Arc::new(AsDensity(reference));
    let ratio = nce_ratio_model(Arc::clone(&model), density, theta_t, c)?;
    let k = model.n_params();
    let nce_gradient = logistic_loss_with_gradient(&ratio, &sample)?.gradient.unwrap_or_default()[..k].to_vec();

    let (data_mean, _) = mean_grad_log_phi(model.as_ref(), data, theta_t);
    let (ref_mean, ref_se) = mean_grad_log_phi(model.as_ref(), &ys, theta_t);
    let scale = nu / (1.0 + nu);
    let mc: Vec<f64> = data_mean.iter().zip(&ref_mean).map(|(d, r)| -(d - r)).collect();
    let exact: Vec<f64> = data_mean.iter().zip(&grad_log_z).map(|(d, z)| -(d - z)).collect();
    let std_error: Vec<f64> = ref_se.iter().map(|s| scale * s).collect();
    let identity_residual = nce_gradient.iter().zip(&mc).map(|(g, v)| (g - scale * v).abs()).fold(0.0, f64::max);
    let b_t = c + log_z;
    let agrees = (b_t.abs() <= B_T_TOLERANCE)
        .then(|| nce_gradient.iter().zip(&exact).zip(&std_error).all(|((g, e), se)| (g - scale * e).abs() <= 3.0 * se));
    if agrees.is_none() {
        log::warn!("b_t = {b_t:e} is not zero; skipping the gradient comparison");
    }
    Ok(EquivalenceReport {
        theta: theta_t.to_vec(),
        c,
        b_t,
        nu,
        scale,
        nce_gradient,
        mc_neg_loglik_gradient: mc,
        exact_neg_loglik_gradient: exact,
        std_error,
        identity_residual,
        agrees,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeNuRow {
    pub nu: f64,
    pub m: usize,
    pub nce_gradient: Vec<f64>,
    /// `−mean ∇log φ(x_i) + mean (φ/q)(y_j) ∇log φ(y_j)` on the same draws.
    pub importance_gradient: Vec<f64>,
    /// `max |nce − importance|`.
    pub deviation: f64,
    /// Deviation from `−mean ∇log φ(x_i) + ∇Z(θ)` when `Z` is analytic.
    pub analytic_deviation: Option<f64>,
    pub effective_sample_size: f64,
    pub degenerate: bool,
}

/// Minimum effective sample size of the importance weights `φ/q`.
pub const MIN_EFFECTIVE_SAMPLE_SIZE: f64 = 10.0;

/// NCE gradients with `h = log φ − log q` (c = 0) at increasing `ν`, each
/// using the first `ν n` draws of one reference bank.
pub fn large_nu_gradient_check(
    model: Arc<dyn EnergyModel>,
    theta: &[f64],
    data: &Points,
    reference: Arc<dyn ReferenceDistribution>,
    nu_list: &[f64],
    seed: u64,
) -> Result<Vec<LargeNuRow>> {
    if data.is_empty() {
        return Err(Error::Empty("data"));
    }
    let counts = nu_list.iter().map(|nu| reference_count(data.len(), *nu)).collect::<Result<Vec<_>>>()?;
    let bank = reference.sample(counts.iter().copied().max().unwrap_or(0), rng::stream(seed, "bank"));
    let density: Arc<dyn Density> = Arc::new(AsDensity(Arc::clone(&reference)));
    let ratio = nce_ratio_model(Arc::clone(&model), density, theta, 0.0)?;
    let k = model.n_params();
    let (data_mean, _) = mean_grad_log_phi(model.as_ref(), data, theta);
    let grad_z = model
        .log_partition(theta)
        .zip(model.log_partition_gradient(theta))
        .map(|(lz, g)| g.iter().map(|v| lz.exp() * v).collect::<Vec<_>>());

    let mut rows = Vec::with_capacity(nu_list.len());
    for (&nu, &m) in nu_list.iter().zip(&counts) {
        let mut ys = bank.clone();
        ys.truncate(m);
        let sample = LabeledTwoSample::new(data.clone(), ys.clone())?;
        let nce_gradient = logistic_loss_with_gradient(&ratio, &sample)?.gradient.unwrap_or_default()[..k].to_vec();

        let mut weighted = vec![0.0; k];
        let (mut sum_w, mut sum_w2) = (0.0, 0.0);
        let mut buf = vec![0.0; k];
        for y in ys.rows() {
            let w = ratio.evaluate(y).exp();
            sum_w += w;
            sum_w2 += w * w;
            grad_log_phi(model.as_ref(), y, theta, &mut buf);
            for (acc, g) in weighted.iter_mut().zip(&buf) {
                *acc += w * g;
            }
        }
        let importance_gradient: Vec<f64> = data_mean.iter().zip(&weighted).map(|(d, w)| -d + w / m as f64).collect();
        let deviation = nce_gradient.iter().zip(&importance_gradient).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let analytic_deviation = grad_z.as_ref().map(|gz| {
            nce_gradient
                .iter()
                .zip(data_mean.iter().zip(gz))
                .map(|(a, (d, z))| (a - (-d + z)).abs())
                .fold(0.0, f64::max)
        });
        let effective_sample_size = sum_w * sum_w / sum_w2;
        let degenerate = effective_sample_size < MIN_EFFECTIVE_SAMPLE_SIZE;
        if degenerate {
            log::warn!("importance weights degenerate at nu = {nu}: ESS {effective_sample_size:.2}");
        }
        rows.push(LargeNuRow {
            nu,
            m,
            nce_gradient,
            importance_gradient,
            deviation,
            analytic_deviation,
            effective_sample_size,
            degenerate,
        });
    }
    Ok(rows)
}
