//! First-order optimizers and gradient verification.

mod descent;
mod finite_difference;

use std::io::Write;
use std::sync::{Arc, LazyLock};

use serde::{Deserialize, Serialize};

pub use descent::{GradientDescent, NormalizedGradientDescent};
pub use finite_difference::{finite_difference_check, finite_difference_gradient};

use crate::error::{Error, Result};
use crate::registry::Registry;

/// A differentiable scalar function of a parameter vector.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, w: &[f64]) -> f64;
    fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>);
}

/// Wraps a closure returning `(value, gradient)`.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, w: &[f64]) -> f64 {
        (self.f)(w).0
    }
    fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>) {
        (self.f)(w)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Registered optimizer name, see [`optimizers`].
    pub method: String,
    /// Initial (line search) or fixed step size.
    pub step_size: f64,
    pub line_search: bool,
    pub max_iters: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
    /// Reserved for stochastic sub-sampling; every shipped objective is full-batch.
    pub seed: Option<u64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: "gradient-descent".into(),
            step_size: 1.0,
            line_search: true,
            max_iters: 2000,
            grad_tol: 1e-7,
            seed: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidArgument("step_size must be positive".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidArgument("grad_tol must be positive".into()));
        }
        optimizers().get(&self.method).map(|_| ())
    }

    pub fn with_max_iters(&self, max_iters: usize) -> Self {
        Self { max_iters, ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    /// Backtracking could not find a decrease: the objective is flat at
    /// floating-point resolution along the descent direction.
    LineSearchStalled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub argmin: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub termination: Termination,
    pub trace: Vec<TraceEntry>,
}

impl Minimum {
    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }

    pub fn write_trace_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "iteration,value,grad_norm,step")?;
        for t in &self.trace {
            writeln!(out, "{},{:.16e},{:.16e},{:.16e}", t.iteration, t.value, t.grad_norm, t.step)?;
        }
        Ok(())
    }
}

pub trait Optimizer: Send + Sync {
    fn minimise(&self, objective: &dyn Objective, init: &[f64], config: &OptimizerConfig) -> Result<Minimum>;
}

static OPTIMIZERS: LazyLock<Registry<dyn Optimizer>> = LazyLock::new(|| {
    Registry::new("optimizer")
        .with("gradient-descent", Arc::new(GradientDescent) as Arc<dyn Optimizer>)
        .with("normalized-gradient-descent", Arc::new(NormalizedGradientDescent) as Arc<dyn Optimizer>)
});

pub fn optimizers() -> &'static Registry<dyn Optimizer> {
    &OPTIMIZERS
}

/// Minimises `objective` from `init` with the optimizer named in `config`.
pub fn minimise(objective: &dyn Objective, init: &[f64], config: &OptimizerConfig) -> Result<Minimum> {
    config.validate()?;
    if init.len() != objective.dim() {
        return Err(Error::DimensionMismatch { expected: objective.dim(), found: init.len() });
    }
    optimizers().get(&config.method)?.minimise(objective, init, config)
}
