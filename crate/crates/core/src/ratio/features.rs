use std::sync::Arc;

use super::RatioFamily;
use crate::error::{Error, Result};
use crate::points::Points;

/// Fixed feature maps for models linear in their parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureMap {
    /// `[1, x_1, ..., x_d]`
    Affine { dim: usize },
    /// `[1, x_i, x_i x_j (i <= j)]`
    Quadratic { dim: usize },
    /// `[1, ||x||^2]`
    SquaredNorm { dim: usize },
}

impl FeatureMap {
    pub fn input_dim(&self) -> usize {
        match *self {
            FeatureMap::Affine { dim } | FeatureMap::Quadratic { dim } | FeatureMap::SquaredNorm { dim } => dim,
        }
    }

    pub fn n_features(&self) -> usize {
        match *self {
            FeatureMap::Affine { dim } => dim + 1,
            FeatureMap::Quadratic { dim } => 1 + dim + dim * (dim + 1) / 2,
            FeatureMap::SquaredNorm { .. } => 2,
        }
    }

    pub fn features(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        match *self {
            FeatureMap::Affine { dim } => out[1..=dim].copy_from_slice(&x[..dim]),
            FeatureMap::Quadratic { dim } => {
                out[1..=dim].copy_from_slice(&x[..dim]);
                let mut k = dim + 1;
                for i in 0..dim {
                    for j in i..dim {
                        out[k] = x[i] * x[j];
                        k += 1;
                    }
                }
            }
            FeatureMap::SquaredNorm { .. } => out[1] = x.iter().map(|v| v * v).sum(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            FeatureMap::Affine { .. } => "affine",
            FeatureMap::Quadratic { .. } => "quadratic",
            FeatureMap::SquaredNorm { .. } => "squared-norm",
        }
    }
}

/// `h(x; w) = w · features(x)`.
#[derive(Clone, Debug)]
pub struct LinearFeatures {
    map: FeatureMap,
}

impl LinearFeatures {
    pub fn new(map: FeatureMap) -> Self {
        Self { map }
    }

    pub fn arc(map: FeatureMap) -> Arc<dyn RatioFamily> {
        Arc::new(Self::new(map))
    }

    pub fn map(&self) -> FeatureMap {
        self.map
    }
}

thread_local! {
    static SCRATCH: std::cell::RefCell<Vec<f64>> = const { std::cell::RefCell::new(Vec::new()) };
}

impl RatioFamily for LinearFeatures {
    fn describe(&self) -> String {
        format!("linear in {} features of dimension {}", self.map.name(), self.map.input_dim())
    }

    fn input_dim(&self) -> usize {
        self.map.input_dim()
    }

    fn n_params(&self) -> usize {
        self.map.n_features()
    }

    fn value(&self, params: &[f64], x: &[f64]) -> f64 {
        SCRATCH.with(|s| {
            let mut s = s.borrow_mut();
            s.resize(self.map.n_features(), 0.0);
            self.map.features(x, &mut s);
            s.iter().zip(params).map(|(f, w)| f * w).sum()
        })
    }

    fn value_and_gradient(&self, params: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        self.map.features(x, grad);
        grad.iter().zip(params).map(|(f, w)| f * w).sum()
    }
}

/// Applies `(x - shift) / scale` to inputs before an inner family.
#[derive(Clone, Debug)]
pub struct Standardize {
    inner: Arc<dyn RatioFamily>,
    shift: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardize {
    pub fn new(inner: Arc<dyn RatioFamily>, shift: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        let d = inner.input_dim();
        if shift.len() != d || scale.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: shift.len().max(scale.len()) });
        }
        if scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidArgument("standardisation scales must be positive".into()));
        }
        Ok(Self { inner, shift, scale })
    }

    /// Uses the column means and standard deviations of `points`.
    pub fn fitted(inner: Arc<dyn RatioFamily>, points: &Points) -> Result<Self> {
        let shift = points.column_means();
        let scale = points.column_variances().into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Self::new(inner, shift, scale)
    }

    fn transform(&self, x: &[f64], out: &mut [f64]) {
        for (((o, x), m), s) in out.iter_mut().zip(x).zip(&self.shift).zip(&self.scale) {
            *o = (x - m) / s;
        }
    }
}

impl RatioFamily for Standardize {
    fn describe(&self) -> String {
        format!("standardised {}", self.inner.describe())
    }

    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn n_params(&self) -> usize {
        self.inner.n_params()
    }

    fn value(&self, params: &[f64], x: &[f64]) -> f64 {
        let mut z = vec![0.0; x.len()];
        self.transform(x, &mut z);
        self.inner.value(params, &z)
    }

    fn value_and_gradient(&self, params: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let mut z = vec![0.0; x.len()];
        self.transform(x, &mut z);
        self.inner.value_and_gradient(params, &z, grad)
    }
}
