//! Tractable densities and samplers used as references, oracles and toy data.
//!
//! Normal variates come from `rand_distr`'s ziggurat sampler on top of the
//! crate's seeded xoshiro256++ generator, so every sample set is a pure
//! function of its seed.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::points::{log_add_exp, Points};
use crate::quadrature::Integrator;
use crate::rng;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub trait Density: Send + Sync {
    fn dim(&self) -> usize;
    /// Log-density, normalised unless the implementor documents otherwise.
    fn log_density(&self, x: &[f64]) -> f64;
}

pub trait Sampler: Send + Sync {
    fn sample(&self, count: usize, seed: u64) -> Points;
}

/// A contrast distribution: sampleable with known log-density.
pub trait ReferenceDistribution: Density + Sampler + fmt::Debug {}

impl<T: Density + Sampler + fmt::Debug> ReferenceDistribution for T {}

/// Gaussian with diagonal covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    mean: Vec<f64>,
    sd: Vec<f64>,
    log_norm: f64,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, sd: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::Empty("gaussian mean"));
        }
        if mean.len() != sd.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), found: sd.len() });
        }
        if sd.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument("standard deviations must be positive".into()));
        }
        Ok(Self::build(mean, sd))
    }

    fn build(mean: Vec<f64>, sd: Vec<f64>) -> Self {
        let log_norm = -sd.iter().map(|s| s.ln()).sum::<f64>() - 0.5 * mean.len() as f64 * LN_2PI;
        Self { mean, sd, log_norm }
    }

    pub fn isotropic(dim: usize, sd: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![sd; dim])
    }

    pub fn standard(dim: usize) -> Self {
        Self::build(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn univariate(mean: f64, sd: f64) -> Result<Self> {
        Self::new(vec![mean], vec![sd])
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sd(&self) -> &[f64] {
        &self.sd
    }
}

impl Density for Gaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.mean.len());
        let mut acc = 0.0;
        for ((x, m), s) in x.iter().zip(&self.mean).zip(&self.sd) {
            let z = (x - m) / s;
            acc += z * z;
        }
        self.log_norm - 0.5 * acc
    }
}

impl Sampler for Gaussian {
    fn sample(&self, count: usize, seed: u64) -> Points {
        let mut r = rng::rng(seed);
        let mut out = Points::with_capacity(self.dim(), count);
        let mut row = vec![0.0; self.dim()];
        for _ in 0..count {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.sd) {
                let z: f64 = StandardNormal.sample(&mut r);
                *v = m + s * z;
            }
            out.push(&row);
        }
        out
    }
}

/// One-dimensional finite Gaussian mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture1d {
    weights: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl GaussianMixture1d {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("mixture components"));
        }
        if weights.len() != means.len() || weights.len() != sds.len() {
            return Err(Error::InvalidArgument("mixture component lists differ in length".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || sds.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidArgument("weights must be >= 0 and sds > 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("mixture weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { weights, means, sds })
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.weights.iter().zip(&self.means).zip(&self.sds).map(|((w, m), s)| w * (s * s + (m - mu) * (m - mu))).sum()
    }
}

impl Density for GaussianMixture1d {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .filter(|((w, _), _)| **w > 0.0)
            .map(|((w, m), s)| {
                let z = (x[0] - m) / s;
                w.ln() - 0.5 * z * z - s.ln() - 0.5 * LN_2PI
            })
            .fold(f64::NEG_INFINITY, log_add_exp)
    }
}

impl Sampler for GaussianMixture1d {
    fn sample(&self, count: usize, seed: u64) -> Points {
        let mut r = rng::rng(seed);
        let mut xs = Vec::with_capacity(count);
        for _ in 0..count {
            let u: f64 = r.random();
            let mut acc = 0.0;
            let mut k = self.weights.len() - 1;
            for (j, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    k = j;
                    break;
                }
            }
            let z: f64 = StandardNormal.sample(&mut r);
            xs.push(self.means[k] + self.sds[k] * z);
        }
        Points::from_scalars(&xs)
    }
}

/// Partition function `sqrt(2 pi sigma^2)` of the unnormalised Gaussian
/// `exp(-x^2 / (2 sigma^2))`.
pub fn gaussian_partition(sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok((2.0 * PI * sigma * sigma).sqrt())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

/// The one-parameter unnormalised Gaussian `exp(-x^2 / (2 sigma^2))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianToy {
    pub sigma: f64,
}

impl GaussianToy {
    pub fn new(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self { sigma })
    }

    pub fn energy(&self, x: f64) -> f64 {
        x * x / (2.0 * self.sigma * self.sigma)
    }

    pub fn log_partition(&self) -> f64 {
        0.5 * (2.0 * PI * self.sigma * self.sigma).ln()
    }
}

/// Log-likelihood of the Gaussian toy split into its partition and energy terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoglikDecomposition {
    pub partition_term: f64,
    pub energy_term: f64,
    pub total: f64,
}

pub fn gaussian_loglik_decomposition(sigma: f64, data: &[f64]) -> Result<LoglikDecomposition> {
    check_sigma(sigma)?;
    if data.is_empty() {
        return Err(Error::Empty("data"));
    }
    let n = data.len() as f64;
    let partition_term = -0.5 * n * (2.0 * PI * sigma * sigma).ln();
    let energy_term = -data.iter().map(|x| x * x).sum::<f64>() / (2.0 * sigma * sigma);
    Ok(LoglikDecomposition { partition_term, energy_term, total: partition_term + energy_term })
}

/// Normalisation tolerance applied before every quadrature-based divergence.
pub const QUADRATURE_MASS_TOLERANCE: f64 = 1e-6;

/// `KL(p || m) + KL(q || m)` with `m = (p + q) / 2`, by quadrature.
///
/// This is the Jensen–Shannon divergence in the unhalved convention, taking
/// values in `[0, 2 log 2]`.
pub fn jsd_quadrature(
    log_p: &dyn Fn(&[f64]) -> f64,
    log_q: &dyn Fn(&[f64]) -> f64,
    integrator: &Integrator,
) -> Result<f64> {
    integrator.check_normalised("p", log_p, QUADRATURE_MASS_TOLERANCE)?;
    integrator.check_normalised("q", log_q, QUADRATURE_MASS_TOLERANCE)?;
    let ln2 = std::f64::consts::LN_2;
    integrator.integrate(|x| {
        let lp = log_p(x);
        let lq = log_q(x);
        let lm = log_add_exp(lp, lq);
        let mut v = 0.0;
        if lp > f64::NEG_INFINITY {
            v += lp.exp() * (ln2 + lp - lm);
        }
        if lq > f64::NEG_INFINITY {
            v += lq.exp() * (ln2 + lq - lm);
        }
        v
    })
}
