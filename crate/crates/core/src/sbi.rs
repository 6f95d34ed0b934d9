//! Likelihood-free inference by ratio estimation.
//!
//! A ratio `h(x, θ) ≈ log p(x | θ) − log p(x)` is fitted by contrasting
//! simulated joint pairs `(x, θ) ~ p(x | θ) p(θ)` with shuffled pairs from
//! `p(x) p(θ)`. The posterior then follows on a grid as
//! `p(θ | x) ∝ p(θ) exp h(x, θ)`.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::distributions::{Density, Gaussian, ReferenceDistribution, Sampler};
use crate::error::{Error, Result};
use crate::optimize::OptimizerConfig;
use crate::points::{log_sum_exp, Points};
use crate::ratio::{fit_ratio, LabeledTwoSample, LogRatioModel};
use crate::rng;

/// A stochastic program `x = g(ω, θ, d)` with `ω` drawn from `seed`.
pub trait Simulator: Send + Sync + fmt::Debug {
    fn parameter_dim(&self) -> usize;
    fn data_dim(&self) -> usize;
    fn design_dim(&self) -> usize;
    /// Must be deterministic in `(theta, design, seed)`.
    fn run(&self, theta: &[f64], design: &[f64], seed: u64) -> Result<Vec<f64>>;
}

/// `x = d θ + ε` with `ε ~ N(0, noise_sd²)`; an empty design means `d = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearGaussianSimulator {
    pub noise_sd: f64,
}

impl Default for LinearGaussianSimulator {
    fn default() -> Self {
        Self { noise_sd: 1.0 }
    }
}

impl Simulator for LinearGaussianSimulator {
    fn parameter_dim(&self) -> usize {
        1
    }
    fn data_dim(&self) -> usize {
        1
    }
    fn design_dim(&self) -> usize {
        1
    }
    fn run(&self, theta: &[f64], design: &[f64], seed: u64) -> Result<Vec<f64>> {
        let d = design.first().copied().unwrap_or(1.0);
        let eps: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng::rng(seed));
        Ok(vec![d * theta[0] + self.noise_sd * eps])
    }
}

/// A prior with a bounding box that contains its samples.
pub trait Prior: ReferenceDistribution {
    fn support(&self) -> Vec<(f64, f64)>;
}

/// Gaussian prior; the support box is `mean ± 8 sd` per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPrior(Gaussian);

impl GaussianPrior {
    pub const SUPPORT_WIDTH: f64 = 8.0;

    pub fn new(gaussian: Gaussian) -> Self {
        Self(gaussian)
    }

    pub fn standard(dim: usize) -> Self {
        Self(Gaussian::standard(dim))
    }
}

impl Density for GaussianPrior {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        self.0.log_density(x)
    }
}

impl Sampler for GaussianPrior {
    fn sample(&self, count: usize, seed: u64) -> Points {
        self.0.sample(count, seed)
    }
}

impl Prior for GaussianPrior {
    fn support(&self) -> Vec<(f64, f64)> {
        self.0
            .mean()
            .iter()
            .zip(self.0.sd())
            .map(|(m, s)| (m - Self::SUPPORT_WIDTH * s, m + Self::SUPPORT_WIDTH * s))
            .collect()
    }
}

/// Uniform prior on a box.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformPrior {
    bounds: Vec<(f64, f64)>,
    log_volume: f64,
}

impl UniformPrior {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(hi > lo) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid uniform bounds {bounds:?}")));
        }
        let log_volume = bounds.iter().map(|(lo, hi)| (hi - lo).ln()).sum();
        Ok(Self { bounds, log_volume })
    }
}

impl Density for UniformPrior {
    fn dim(&self) -> usize {
        self.bounds.len()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        let inside = x.iter().zip(&self.bounds).all(|(v, (lo, hi))| v >= lo && v <= hi);
        if inside {
            -self.log_volume
        } else {
            f64::NEG_INFINITY
        }
    }
}

impl Sampler for UniformPrior {
    fn sample(&self, count: usize, seed: u64) -> Points {
        let mut r = rng::rng(seed);
        let mut out = Points::with_capacity(self.bounds.len(), count);
        let mut row = vec![0.0; self.bounds.len()];
        for _ in 0..count {
            for (v, (lo, hi)) in row.iter_mut().zip(&self.bounds) {
                *v = lo + (hi - lo) * r.random::<f64>();
            }
            out.push(&row);
        }
        out
    }
}

impl Prior for UniformPrior {
    fn support(&self) -> Vec<(f64, f64)> {
        self.bounds.clone()
    }
}

/// Simulated `(θ_i, x_i)` pairs with their provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct JointBank {
    pub thetas: Points,
    pub xs: Points,
    pub design: Vec<f64>,
    pub master_seed: u64,
    /// Simulator failures that were retried with a fresh sub-seed.
    pub retries: usize,
}

/// Retries allowed per draw before a simulator failure is fatal.
pub const MAX_SIMULATION_RETRIES: u64 = 10;

impl JointBank {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Rows `[x, θ]`, the input layout of amortised ratio models.
    pub fn concatenated(&self) -> Result<Points> {
        Points::concat_columns(&self.xs, &self.thetas)
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let design: Vec<String> = self.design.iter().map(|d| format!("{d:.16e}")).collect();
        writeln!(out, "# master_seed={} design={}", self.master_seed, design.join(";"))?;
        let mut header: Vec<String> = (0..self.thetas.dim()).map(|j| format!("theta_{j}")).collect();
        header.extend((0..self.xs.dim()).map(|j| format!("x_{j}")));
        writeln!(out, "{}", header.join(","))?;
        for (t, x) in self.thetas.rows().zip(self.xs.rows()) {
            let cells: Vec<String> = t.iter().chain(x).map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv(input: impl BufRead) -> Result<Self> {
        let bad = |what: &str| Error::InvalidArgument(format!("malformed bank csv: {what}"));
        let mut lines = input.lines();
        let meta = lines.next().ok_or_else(|| bad("missing header"))??;
        let meta = meta.strip_prefix("# ").ok_or_else(|| bad("missing metadata line"))?;
        let (mut master_seed, mut design) = (None, Vec::new());
        for field in meta.split_whitespace() {
            match field.split_once('=') {
                Some(("master_seed", v)) => master_seed = Some(v.parse().map_err(|_| bad("master_seed"))?),
                Some(("design", "")) => {}
                Some(("design", v)) => {
                    design = v.split(';').map(|d| d.parse().map_err(|_| bad("design"))).collect::<Result<_>>()?
                }
                _ => return Err(bad(field)),
            }
        }
        let header = lines.next().ok_or_else(|| bad("missing column header"))??;
        let p = header.split(',').filter(|c| c.starts_with("theta_")).count();
        let q = header.split(',').filter(|c| c.starts_with("x_")).count();
        let (mut thetas, mut xs) = (Points::with_capacity(p, 0), Points::with_capacity(q, 0));
        for line in lines {
            let cells: Vec<f64> =
                line?.split(',').map(|c| c.parse().map_err(|_| bad("number"))).collect::<Result<_>>()?;
            if cells.len() != p + q {
                return Err(bad("row width"));
            }
            thetas.push(&cells[..p]);
            xs.push(&cells[p..]);
        }
        Ok(Self { thetas, xs, design, master_seed: master_seed.ok_or_else(|| bad("master_seed"))?, retries: 0 })
    }
}

/// Runs the simulator once, retrying with fresh sub-seeds on failure.
pub fn simulate_with_retries(
    sim: &dyn Simulator,
    theta: &[f64],
    design: &[f64],
    seed: u64,
) -> Result<(Vec<f64>, usize)> {
    let mut last = None;
    for attempt in 0..=MAX_SIMULATION_RETRIES {
        let sub = if attempt == 0 { seed } else { rng::derive(seed, attempt) };
        match sim.run(theta, design, sub) {
            Ok(x) if x.len() == sim.data_dim() => return Ok((x, attempt as usize)),
            Ok(x) => return Err(Error::DimensionMismatch { expected: sim.data_dim(), found: x.len() }),
            Err(e) => {
                log::debug!("simulation at {theta:?} failed (attempt {attempt}): {e}");
                last = Some(e);
            }
        }
    }
    Err(Error::Simulation(format!(
        "{} retries exhausted at theta {theta:?}: {}",
        MAX_SIMULATION_RETRIES,
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Draws `θ_i ~ prior` and `x_i = sim(θ_i, design)` with per-draw sub-seeds.
pub fn simulate_joint(
    sim: &dyn Simulator,
    prior: &dyn Prior,
    design: &[f64],
    n: usize,
    seed: u64,
) -> Result<JointBank> {
    if n == 0 {
        return Err(Error::Empty("joint sample"));
    }
    if prior.dim() != sim.parameter_dim() {
        return Err(Error::DimensionMismatch { expected: sim.parameter_dim(), found: prior.dim() });
    }
    let thetas = prior.sample(n, rng::stream(seed, "prior"));
    let sim_seed = rng::stream(seed, "simulator");
    let runs = (0..n)
        .into_par_iter()
        .map(|i| simulate_with_retries(sim, thetas.row(i), design, rng::derive(sim_seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut xs = Points::with_capacity(sim.data_dim(), n);
    let mut retries = 0;
    for (x, r) in &runs {
        xs.push(x);
        retries += r;
    }
    Ok(JointBank { thetas, xs, design: design.to_vec(), master_seed: seed, retries })
}

/// The same bank with `θ` permuted uniformly, giving draws from `p(x) p(θ)`.
pub fn marginal_pairs(joint: &JointBank, seed: u64) -> Result<JointBank> {
    if joint.len() < 2 {
        return Err(Error::InvalidArgument("marginal pairs need at least two joint pairs".into()));
    }
    let mut order: Vec<usize> = (0..joint.len()).collect();
    order.shuffle(&mut rng::rng(seed));
    Ok(JointBank { thetas: joint.thetas.select(&order), ..joint.clone() })
}

/// Fits `h(x, θ) ≈ log p(x | θ) − log p(x)` on `[x, θ]` rows with `ν = 1`.
pub fn lfire_amortised_fit(
    joint: &JointBank,
    marginal: &JointBank,
    init: &LogRatioModel,
    config: &OptimizerConfig,
) -> Result<LogRatioModel> {
    if joint.len() != marginal.len() {
        return Err(Error::InvalidArgument(format!(
            "joint and marginal banks must have equal size, got {} and {}",
            joint.len(),
            marginal.len()
        )));
    }
    let sample = LabeledTwoSample::new(joint.concatenated()?, marginal.concatenated()?)?;
    let fit = fit_ratio(init, Arc::new(sample), config)?;
    log::info!("amortised fit: loss {:.6} ({:?})", fit.final_loss, fit.termination);
    Ok(fit.model)
}

/// Normalised weights on a regular lattice of cell centres.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorGrid {
    axes: Vec<Vec<f64>>,
    points: Points,
    weights: Vec<f64>,
    cell_volume: f64,
}

/// Cell centres of `resolution` equal cells on `[lo, hi]`.
pub fn cell_centres(lo: f64, hi: f64, resolution: usize) -> Vec<f64> {
    let width = (hi - lo) / resolution as f64;
    (0..resolution).map(|i| lo + (i as f64 + 0.5) * width).collect()
}

impl PosteriorGrid {
    /// Discretises `exp(log_weight)` on the box, normalising over the lattice.
    pub fn from_log_weights(
        support: &[(f64, f64)],
        resolution: usize,
        mut log_weight: impl FnMut(&[f64]) -> f64,
    ) -> Result<Self> {
        if resolution == 0 || support.is_empty() {
            return Err(Error::InvalidArgument("grid needs a non-empty box and resolution ≥ 1".into()));
        }
        let axes: Vec<Vec<f64>> = support.iter().map(|(lo, hi)| cell_centres(*lo, *hi, resolution)).collect();
        let cell_volume = support.iter().map(|(lo, hi)| (hi - lo) / resolution as f64).product();
        let dim = axes.len();
        let total = resolution.pow(dim as u32);
        let mut points = Points::with_capacity(dim, total);
        let mut row = vec![0.0; dim];
        for flat in 0..total {
            let mut rest = flat;
            for j in (0..dim).rev() {
                row[j] = axes[j][rest % resolution];
                rest /= resolution;
            }
            points.push(&row);
        }
        let logs: Vec<f64> = points.rows().map(&mut log_weight).collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() || logs.iter().any(|v| v.is_nan()) {
            return Err(Error::Underflow { max_log_weight: max });
        }
        let norm = log_sum_exp(&logs);
        let weights = logs.iter().map(|v| (v - norm).exp()).collect();
        Ok(Self { axes, points, weights, cell_volume })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (t, w) in self.points.rows().zip(&self.weights) {
            for (a, v) in m.iter_mut().zip(t) {
                *a += w * v;
            }
        }
        m
    }

    /// Per-coordinate variances.
    pub fn variance(&self) -> Vec<f64> {
        let mean = self.mean();
        let mut var = vec![0.0; self.dim()];
        for (t, w) in self.points.rows().zip(&self.weights) {
            for ((a, v), m) in var.iter_mut().zip(t).zip(&mean) {
                *a += w * (v - m) * (v - m);
            }
        }
        var
    }

    /// The lattice point of largest weight (first on ties).
    pub fn mode(&self) -> Vec<f64> {
        let best = self
            .weights
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, w)| if *w > acc.1 { (i, *w) } else { acc });
        self.points.row(best.0).to_vec()
    }

    /// `½ Σ |w_i − v_i|` against a grid on the same lattice.
    pub fn total_variation(&self, other: &PosteriorGrid) -> Result<f64> {
        if self.axes != other.axes {
            return Err(Error::InvalidArgument("grids are on different lattices".into()));
        }
        Ok(0.5 * self.weights.iter().zip(&other.weights).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("theta_{j}")).collect();
        header.push("weight".into());
        writeln!(out, "{}", header.join(","))?;
        for (t, w) in self.points.rows().zip(&self.weights) {
            let cells: Vec<String> = t.iter().chain(std::iter::once(w)).map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// `p(θ | x_obs) ∝ p(θ) exp h(x_obs, θ)` on a `resolution`-per-axis lattice over the prior box.
pub fn posterior_from_ratio(
    ratio: &LogRatioModel,
    prior: &dyn Prior,
    x_obs: &[f64],
    resolution: usize,
) -> Result<PosteriorGrid> {
    if ratio.input_dim() != x_obs.len() + prior.dim() {
        return Err(Error::DimensionMismatch { expected: ratio.input_dim(), found: x_obs.len() + prior.dim() });
    }
    let mut input = x_obs.to_vec();
    PosteriorGrid::from_log_weights(&prior.support(), resolution, |theta| {
        input.truncate(x_obs.len());
        input.extend_from_slice(theta);
        prior.log_density(theta) + ratio.evaluate(&input)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerThetaConfig {
    /// Simulations per lattice point and for the prior predictive.
    pub n: usize,
    pub resolution: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

/// Per-`θ` ratio estimation: at every lattice point, a ratio over `x` is
/// fitted between `p(x | θ_g)` and the prior predictive, and evaluated at `x_obs`.
pub fn lfire_per_theta(
    sim: &dyn Simulator,
    prior: &dyn Prior,
    design: &[f64],
    x_obs: &[f64],
    init: &LogRatioModel,
    config: &PerThetaConfig,
) -> Result<PosteriorGrid> {
    let PerThetaConfig { n, resolution, seed, .. } = *config;
    let marginal = simulate_joint(sim, prior, design, n, rng::stream(seed, "marginal"))?.xs;
    let support = prior.support();
    let scratch = PosteriorGrid::from_log_weights(&support, resolution, |_| 0.0)?;
    let h: Vec<f64> = scratch
        .points()
        .rows()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(g, theta)| {
            let base = rng::derive(rng::stream(seed, "conditional"), g as u64);
            let mut xs = Points::with_capacity(sim.data_dim(), n);
            for i in 0..n {
                xs.push(&simulate_with_retries(sim, theta, design, rng::derive(base, i as u64))?.0);
            }
            let sample = LabeledTwoSample::new(xs, marginal.clone())?;
            Ok(fit_ratio(init, Arc::new(sample), &config.optimizer)?.model.evaluate(x_obs))
        })
        .collect::<Result<_>>()?;
    let mut index = 0;
    PosteriorGrid::from_log_weights(&support, resolution, |theta| {
        let v = prior.log_density(theta) + h[index];
        index += 1;
        v
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct Flaky;

    impl Simulator for Flaky {
        fn parameter_dim(&self) -> usize {
            1
        }
        fn data_dim(&self) -> usize {
            1
        }
        fn design_dim(&self) -> usize {
            0
        }
        fn run(&self, theta: &[f64], _: &[f64], seed: u64) -> Result<Vec<f64>> {
            if seed.is_multiple_of(3) {
                Err(Error::Simulation("unlucky seed".into()))
            } else {
                Ok(vec![theta[0]])
            }
        }
    }

    #[derive(Debug)]
    struct Broken;

    impl Simulator for Broken {
        fn parameter_dim(&self) -> usize {
            1
        }
        fn data_dim(&self) -> usize {
            1
        }
        fn design_dim(&self) -> usize {
            0
        }
        fn run(&self, _: &[f64], _: &[f64], _: u64) -> Result<Vec<f64>> {
            Err(Error::Simulation("always".into()))
        }
    }

    #[test]
    fn failures_are_retried() {
        let bank = simulate_joint(&Flaky, &GaussianPrior::standard(1), &[], 300, 5).unwrap();
        assert!(bank.retries > 0);
        assert_eq!(bank.xs, bank.thetas);
    }

    #[test]
    fn persistent_failure_is_an_error() {
        let err = simulate_joint(&Broken, &GaussianPrior::standard(1), &[], 3, 5).unwrap_err();
        assert!(matches!(err, Error::Simulation(m) if m.contains("retries")));
    }

    #[test]
    fn uniform_prior_samples_in_box() {
        let prior = UniformPrior::new(vec![(0.0, 3.0), (0.0, 1.5)]).unwrap();
        let s = prior.sample(1000, 1);
        let support = prior.support();
        assert!(s.rows().all(|r| r.iter().zip(&support).all(|(v, (lo, hi))| v >= lo && v <= hi)));
        assert!((prior.log_density(&[1.0, 1.0]) + 4.5_f64.ln()).abs() < 1e-15);
        assert_eq!(prior.log_density(&[4.0, 1.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn grid_lattice_order_and_volume() {
        let g = PosteriorGrid::from_log_weights(&[(0.0, 2.0), (0.0, 1.0)], 2, |_| 0.0).unwrap();
        assert_eq!(g.points().row(0), &[0.5, 0.25]);
        assert_eq!(g.points().row(1), &[0.5, 0.75]);
        assert_eq!(g.points().row(2), &[1.5, 0.25]);
        assert!((g.cell_volume() - 0.5).abs() < 1e-15);
        assert!(g.weights().iter().all(|w| (w - 0.25).abs() < 1e-15));
    }

    #[test]
    fn underflow_is_reported() {
        let err = PosteriorGrid::from_log_weights(&[(0.0, 1.0)], 4, |_| f64::NEG_INFINITY).unwrap_err();
        assert!(matches!(err, Error::Underflow { .. }));
    }
}
