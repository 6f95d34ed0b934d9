//! Log-ratio models `h(x; w)` and the logistic-loss engine that fits them.

mod features;
mod loss;
mod mlp;

use std::fmt;
use std::sync::{Arc, LazyLock};

pub use features::{FeatureMap, LinearFeatures, Standardize};
pub use loss::{
    fit_ratio, jsd_from_loss, limiting_loss_at_optimum, logistic_loss, logistic_loss_gradient,
    logistic_loss_with_gradient, optimal_ratio_oracle, softplus, LabeledTwoSample, LogisticObjective, LossReport,
    RatioFit, TWO_LN_2,
};
pub use mlp::Mlp;

use crate::error::{Error, Result};
use crate::registry::Registry;

/// A parametrisation of log-ratio functions.
///
/// Implementors are stateless: parameters are passed in, which lets one
/// family back many fitted models and lets optimizers own the parameter
/// vector.
pub trait RatioFamily: Send + Sync + fmt::Debug {
    fn describe(&self) -> String;
    fn input_dim(&self) -> usize;
    fn n_params(&self) -> usize;
    fn value(&self, params: &[f64], x: &[f64]) -> f64;
    /// Writes `∇_w h(x; w)` into `grad` (length `n_params`) and returns `h(x; w)`.
    fn value_and_gradient(&self, params: &[f64], x: &[f64], grad: &mut [f64]) -> f64;
}

/// A ratio family together with a parameter vector.
#[derive(Clone)]
pub struct LogRatioModel {
    family: Arc<dyn RatioFamily>,
    params: Vec<f64>,
}

impl fmt::Debug for LogRatioModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LogRatioModel").field("family", &self.family.describe()).field("params", &self.params).finish()
    }
}

impl LogRatioModel {
    pub fn new(family: Arc<dyn RatioFamily>, params: Vec<f64>) -> Result<Self> {
        if params.len() != family.n_params() {
            return Err(Error::DimensionMismatch { expected: family.n_params(), found: params.len() });
        }
        Ok(Self { family, params })
    }

    pub fn zeros(family: Arc<dyn RatioFamily>) -> Self {
        let params = vec![0.0; family.n_params()];
        Self { family, params }
    }

    /// A parameter-free model wrapping a fixed function, e.g. an oracle ratio.
    pub fn fixed(input_dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::zeros(Arc::new(FixedRatio { input_dim, f: Box::new(f) }))
    }

    pub fn family(&self) -> &Arc<dyn RatioFamily> {
        &self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch { expected: self.params.len(), found: params.len() });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        Self::new(Arc::clone(&self.family), params.to_vec())
    }

    pub fn input_dim(&self) -> usize {
        self.family.input_dim()
    }

    pub fn describe(&self) -> String {
        self.family.describe()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.family.value(&self.params, x)
    }

    pub fn parameter_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.params.len()];
        self.family.value_and_gradient(&self.params, x, &mut g);
        g
    }
}

type RatioFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

struct FixedRatio {
    input_dim: usize,
    f: RatioFn,
}

impl fmt::Debug for FixedRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FixedRatio(dim {})", self.input_dim)
    }
}

impl RatioFamily for FixedRatio {
    fn describe(&self) -> String {
        "fixed function".into()
    }
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn n_params(&self) -> usize {
        0
    }
    fn value(&self, _: &[f64], x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn value_and_gradient(&self, _: &[f64], x: &[f64], _: &mut [f64]) -> f64 {
        (self.f)(x)
    }
}

/// Builds a ratio family for inputs of a given dimension.
pub trait FamilyFactory: Send + Sync {
    fn build(&self, input_dim: usize, hidden: usize) -> Arc<dyn RatioFamily>;
}

impl<F> FamilyFactory for F
where
    F: Fn(usize, usize) -> Arc<dyn RatioFamily> + Send + Sync,
{
    fn build(&self, input_dim: usize, hidden: usize) -> Arc<dyn RatioFamily> {
        self(input_dim, hidden)
    }
}

type FactoryFn = fn(usize, usize) -> Arc<dyn RatioFamily>;

fn factory(f: FactoryFn) -> Arc<dyn FamilyFactory> {
    Arc::new(f)
}

static FAMILIES: LazyLock<Registry<dyn FamilyFactory>> = LazyLock::new(|| {
    Registry::new("ratio family")
        .with("linear", factory(|d, _| LinearFeatures::arc(FeatureMap::Affine { dim: d })))
        .with("quadratic", factory(|d, _| LinearFeatures::arc(FeatureMap::Quadratic { dim: d })))
        .with("squared-norm", factory(|d, _| LinearFeatures::arc(FeatureMap::SquaredNorm { dim: d })))
        .with("mlp", factory(|d, h| Arc::new(Mlp::new(d, h.max(1)))))
});

/// Registered ratio families: `linear`, `quadratic`, `squared-norm`, `mlp`.
pub fn families() -> &'static Registry<dyn FamilyFactory> {
    &FAMILIES
}

/// Looks up a family by name; `hidden` is only used by `mlp`.
pub fn family_by_name(name: &str, input_dim: usize, hidden: usize) -> Result<Arc<dyn RatioFamily>> {
    Ok(families().get(name)?.build(input_dim, hidden))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::{finite_difference_check, FnObjective};
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_vec(r: &mut rng::Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, r)).collect()
    }

    /// Each registered family's parameter gradient matches central differences.
    #[test]
    fn parameter_gradients_match_finite_differences() {
        let mut r = rng::rng(3);
        for name in families().names() {
            for trial in 0..10 {
                let dim = 1 + trial % 3;
                let family = family_by_name(name, dim, 4).unwrap();
                let x = random_vec(&mut r, dim, 1.0);
                let w = random_vec(&mut r, family.n_params(), 0.7);
                let f = Arc::clone(&family);
                let xc = x.clone();
                let obj = FnObjective::new(family.n_params(), move |w: &[f64]| {
                    let mut g = vec![0.0; w.len()];
                    let v = f.value_and_gradient(w, &xc, &mut g);
                    (v, g)
                });
                let err = finite_difference_check(&obj, &w, 1e-6);
                assert!(err < 1e-5, "{name} trial {trial}: {err}");
                let mut g = vec![0.0; family.n_params()];
                let v = family.value_and_gradient(&w, &x, &mut g);
                assert_eq!(v, family.value(&w, &x));
            }
        }
    }

    #[test]
    fn model_checks_parameter_length() {
        let fam = family_by_name("quadratic", 2, 0).unwrap();
        assert!(LogRatioModel::new(Arc::clone(&fam), vec![0.0; 3]).is_err());
        let mut m = LogRatioModel::zeros(fam);
        assert_eq!(m.params().len(), 6);
        assert!(m.set_params(&[1.0]).is_err());
        assert_eq!(m.evaluate(&[0.3, 0.4]), 0.0);
        assert!(family_by_name("cubic", 1, 0).is_err());
    }

    #[test]
    fn fixed_model_evaluates_closure() {
        let m = LogRatioModel::fixed(1, |x| 2.0 * x[0]);
        assert_eq!(m.evaluate(&[1.5]), 3.0);
        assert!(m.parameter_gradient(&[1.5]).is_empty());
    }
}
