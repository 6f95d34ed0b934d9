use std::sync::Arc;

use super::{LogRatioModel, RatioFamily};
use crate::distributions::QUADRATURE_MASS_TOLERANCE;
use crate::error::{Error, Result};
use crate::optimize::{minimise, Objective, OptimizerConfig, Termination};
use crate::points::Points;
use crate::quadrature::Integrator;

pub const TWO_LN_2: f64 = 2.0 * std::f64::consts::LN_2;

/// `log(1 + exp(z))`, finite for every finite `z`.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Data points (label 1) and reference points (label 0).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledTwoSample {
    data: Points,
    reference: Points,
}

impl LabeledTwoSample {
    pub fn new(data: Points, reference: Points) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("data points"));
        }
        if reference.is_empty() {
            return Err(Error::Empty("reference points"));
        }
        if data.dim() != reference.dim() {
            return Err(Error::DimensionMismatch { expected: data.dim(), found: reference.dim() });
        }
        Ok(Self { data, reference })
    }

    pub fn data(&self) -> &Points {
        &self.data
    }

    pub fn reference(&self) -> &Points {
        &self.reference
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    /// `m / n`.
    pub fn nu(&self) -> f64 {
        self.reference.len() as f64 / self.data.len() as f64
    }

    /// Exchanges the roles of data and reference.
    pub fn swapped(&self) -> Self {
        Self { data: self.reference.clone(), reference: self.data.clone() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    pub data_term: f64,
    pub reference_term: f64,
    /// Monte Carlo standard error of `loss` treating points as independent draws.
    pub std_error: f64,
    pub nu: f64,
    pub gradient: Option<Vec<f64>>,
}

fn check_dims(family: &dyn RatioFamily, sample: &LabeledTwoSample) -> Result<()> {
    if family.input_dim() != sample.dim() {
        return Err(Error::DimensionMismatch { expected: family.input_dim(), found: sample.dim() });
    }
    Ok(())
}

struct Accumulator {
    sum: f64,
    sum_sq: f64,
}

impl Accumulator {
    fn new() -> Self {
        Self { sum: 0.0, sum_sq: 0.0 }
    }
    fn add(&mut self, v: f64) {
        self.sum += v;
        self.sum_sq += v * v;
    }
    /// (mean, variance of the mean)
    fn finish(&self, n: usize) -> (f64, f64) {
        let nf = n as f64;
        let mean = self.sum / nf;
        let var = if n > 1 { ((self.sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        (mean, var / nf)
    }
}

fn evaluate(family: &dyn RatioFamily, params: &[f64], sample: &LabeledTwoSample, want_gradient: bool) -> LossReport {
    let nu = sample.nu();
    let log_nu = nu.ln();
    let n = sample.data.len();
    let m = sample.reference.len();
    let p = family.n_params();
    let mut gradient = if want_gradient { vec![0.0; p] } else { Vec::new() };
    let mut point_grad = vec![0.0; p];

    // (1/n) Σ log[1 + ν e^{-h(x_i)}]
    let mut data_acc = Accumulator::new();
    let mut data_grad = vec![0.0; if want_gradient { p } else { 0 }];
    for x in sample.data.rows() {
        let h =
            if want_gradient { family.value_and_gradient(params, x, &mut point_grad) } else { family.value(params, x) };
        data_acc.add(softplus(log_nu - h));
        if want_gradient {
            // -ν e^{-h} / (1 + ν e^{-h})
            let weight = -sigmoid(log_nu - h);
            for (g, d) in data_grad.iter_mut().zip(&point_grad) {
                *g += weight * d;
            }
        }
    }

    // (ν/m) Σ log[1 + e^{h(y_j)} / ν]
    let mut ref_acc = Accumulator::new();
    let mut ref_grad = vec![0.0; if want_gradient { p } else { 0 }];
    for y in sample.reference.rows() {
        let h =
            if want_gradient { family.value_and_gradient(params, y, &mut point_grad) } else { family.value(params, y) };
        ref_acc.add(nu * softplus(h - log_nu));
        if want_gradient {
            // e^{h} / (1 + e^{h} / ν)
            let weight = nu * sigmoid(h - log_nu);
            for (g, d) in ref_grad.iter_mut().zip(&point_grad) {
                *g += weight * d;
            }
        }
    }

    let (data_term, data_var) = data_acc.finish(n);
    let (reference_term, ref_var) = ref_acc.finish(m);
    if want_gradient {
        for ((g, a), b) in gradient.iter_mut().zip(&data_grad).zip(&ref_grad) {
            *g = a / n as f64 + b / m as f64;
        }
    }
    LossReport {
        loss: data_term + reference_term,
        data_term,
        reference_term,
        std_error: (data_var + ref_var).sqrt(),
        nu,
        gradient: want_gradient.then_some(gradient),
    }
}

/// The logistic loss of `model` on `sample`, normalised by the data count.
pub fn logistic_loss(model: &LogRatioModel, sample: &LabeledTwoSample) -> Result<LossReport> {
    check_dims(model.family().as_ref(), sample)?;
    Ok(evaluate(model.family().as_ref(), model.params(), sample, false))
}

/// Loss together with its parameter gradient.
pub fn logistic_loss_with_gradient(model: &LogRatioModel, sample: &LabeledTwoSample) -> Result<LossReport> {
    check_dims(model.family().as_ref(), sample)?;
    Ok(evaluate(model.family().as_ref(), model.params(), sample, true))
}

pub fn logistic_loss_gradient(model: &LogRatioModel, sample: &LabeledTwoSample) -> Result<Vec<f64>> {
    Ok(logistic_loss_with_gradient(model, sample)?.gradient.unwrap_or_default())
}

/// The logistic loss as an optimisation objective over a family's parameters.
#[derive(Clone)]
pub struct LogisticObjective {
    family: Arc<dyn RatioFamily>,
    sample: Arc<LabeledTwoSample>,
}

impl LogisticObjective {
    pub fn new(family: Arc<dyn RatioFamily>, sample: Arc<LabeledTwoSample>) -> Result<Self> {
        check_dims(family.as_ref(), &sample)?;
        Ok(Self { family, sample })
    }

    pub fn report(&self, params: &[f64]) -> LossReport {
        evaluate(self.family.as_ref(), params, &self.sample, false)
    }

    pub fn sample(&self) -> &LabeledTwoSample {
        &self.sample
    }
}

impl Objective for LogisticObjective {
    fn dim(&self) -> usize {
        self.family.n_params()
    }

    fn value(&self, w: &[f64]) -> f64 {
        evaluate(self.family.as_ref(), w, &self.sample, false).loss
    }

    fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let r = evaluate(self.family.as_ref(), w, &self.sample, true);
        (r.loss, r.gradient.unwrap_or_default())
    }
}

/// A model fitted by minimising the logistic loss.
#[derive(Clone, Debug)]
pub struct RatioFit {
    pub model: LogRatioModel,
    pub final_loss: f64,
    pub final_loss_se: f64,
    pub termination: Termination,
}

/// Minimises the logistic loss over `init`'s family, starting at its parameters.
pub fn fit_ratio(init: &LogRatioModel, sample: Arc<LabeledTwoSample>, config: &OptimizerConfig) -> Result<RatioFit> {
    let objective = LogisticObjective::new(Arc::clone(init.family()), sample)?;
    let min = minimise(&objective, init.params(), config)?;
    let report = objective.report(&min.argmin);
    Ok(RatioFit {
        model: init.with_params(&min.argmin)?,
        final_loss: report.loss,
        final_loss_se: report.std_error,
        termination: min.termination,
    })
}

/// `x ↦ log p(x) − log q(x)`, the minimiser of the limiting logistic loss.
pub fn optimal_ratio_oracle<P, Q>(log_p: P, log_q: Q) -> impl Fn(&[f64]) -> f64 + Send + Sync
where
    P: Fn(&[f64]) -> f64 + Send + Sync,
    Q: Fn(&[f64]) -> f64 + Send + Sync,
{
    move |x| log_p(x) - log_q(x)
}

/// `−E_p log[p/(p+νq)] − ν E_q log[νq/(νq+p)]` by quadrature.
pub fn limiting_loss_at_optimum(
    log_p: &dyn Fn(&[f64]) -> f64,
    log_q: &dyn Fn(&[f64]) -> f64,
    nu: f64,
    integrator: &Integrator,
) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("nu must be positive, got {nu}")));
    }
    integrator.check_normalised("p", log_p, QUADRATURE_MASS_TOLERANCE)?;
    integrator.check_normalised("q", log_q, QUADRATURE_MASS_TOLERANCE)?;
    let log_nu = nu.ln();
    integrator.integrate(|x| {
        let lp = log_p(x);
        let lq = log_q(x);
        let mut v = 0.0;
        if lp > f64::NEG_INFINITY {
            v += lp.exp() * softplus(log_nu + lq - lp);
        }
        if lq > f64::NEG_INFINITY {
            v += nu * lq.exp() * softplus(lp - lq - log_nu);
        }
        v
    })
}

/// `2 log 2 − loss`: a lower bound on the Jensen–Shannon divergence between
/// data and reference distributions, tight when the loss was evaluated at
/// the optimal ratio with infinite samples. Requires `ν = 1`.
pub fn jsd_from_loss(report: &LossReport) -> Result<f64> {
    if (report.nu - 1.0).abs() > 1e-12 {
        return Err(Error::NuNotOne(report.nu));
    }
    Ok(TWO_LN_2 - report.loss)
}
