use super::{Minimum, Objective, Optimizer, OptimizerConfig, Termination, TraceEntry};
use crate::error::{Error, Result};
use crate::points::{dot, norm};

/// Steepest descent. With line search the trial step is the Barzilai–Borwein
/// step `s·s / s·y` (falling back to twice the last accepted step) followed by
/// Armijo backtracking, so the objective trace is non-increasing.
pub struct GradientDescent;

/// Descent along `-g / ||g||` with a fixed step length, or a backtracked one
/// when line search is enabled.
pub struct NormalizedGradientDescent;

impl Optimizer for GradientDescent {
    fn minimise(&self, objective: &dyn Objective, init: &[f64], config: &OptimizerConfig) -> Result<Minimum> {
        descend(objective, init, config, false)
    }
}

impl Optimizer for NormalizedGradientDescent {
    fn minimise(&self, objective: &dyn Objective, init: &[f64], config: &OptimizerConfig) -> Result<Minimum> {
        descend(objective, init, config, true)
    }
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 80;
/// Consecutive increases tolerated without line search.
const DIVERGENCE_PATIENCE: usize = 10;
/// Consecutive accepted steps without a strict decrease before stopping.
const STALL_PATIENCE: usize = 3;

fn finite(v: f64, g: &[f64]) -> bool {
    v.is_finite() && g.iter().all(|x| x.is_finite())
}

fn descend(objective: &dyn Objective, init: &[f64], config: &OptimizerConfig, normalized: bool) -> Result<Minimum> {
    let mut w = init.to_vec();
    let (mut f, mut g) = objective.value_and_gradient(&w);
    if !finite(f, &g) {
        return Err(Error::NonFinite { iteration: 0, last_good: w });
    }
    let mut step = config.step_size;
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut trace = Vec::new();
    let mut increases = 0;
    let mut stalls = 0;
    let mut trial = vec![0.0; w.len()];

    for iteration in 0..=config.max_iters {
        let grad_norm = norm(&g);
        trace.push(TraceEntry { iteration, value: f, grad_norm, step });
        let done = |termination| Minimum { argmin: w.clone(), value: f, grad_norm, termination, trace: trace.clone() };
        if grad_norm < config.grad_tol {
            return Ok(done(Termination::GradientTolerance));
        }
        if iteration == config.max_iters {
            return Ok(done(Termination::MaxIterations));
        }
        let scale = if normalized { 1.0 / grad_norm } else { 1.0 };
        let direction: Vec<f64> = g.iter().map(|v| -v * scale).collect();

        if config.line_search {
            let slope = dot(&g, &direction);
            let mut t = match (&previous, normalized) {
                (Some((w_prev, g_prev)), false) => {
                    let s: Vec<f64> = w.iter().zip(w_prev).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = g.iter().zip(g_prev).map(|(a, b)| a - b).collect();
                    let sy = dot(&s, &y);
                    if sy > 0.0 {
                        dot(&s, &s) / sy
                    } else {
                        2.0 * step
                    }
                }
                (Some(_), true) => 2.0 * step,
                (None, _) => config.step_size,
            };
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                for ((o, w), d) in trial.iter_mut().zip(&w).zip(&direction) {
                    *o = w + t * d;
                }
                let value = objective.value(&trial);
                if value.is_finite() && value <= f + ARMIJO * t * slope {
                    accepted = Some(t);
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some(t) => step = t,
                None => return Ok(done(Termination::LineSearchStalled)),
            }
        } else {
            for ((o, w), d) in trial.iter_mut().zip(&w).zip(&direction) {
                *o = w + step * d;
            }
        }

        let (f_new, g_new) = objective.value_and_gradient(&trial);
        if !finite(f_new, &g_new) {
            return Err(Error::NonFinite { iteration: iteration + 1, last_good: w });
        }
        if config.line_search {
            stalls = if f_new < f { 0 } else { stalls + 1 };
            if stalls >= STALL_PATIENCE {
                let grad_norm = norm(&g_new);
                trace.push(TraceEntry { iteration: iteration + 1, value: f_new, grad_norm, step });
                return Ok(Minimum {
                    argmin: trial.clone(),
                    value: f_new,
                    grad_norm,
                    termination: Termination::LineSearchStalled,
                    trace,
                });
            }
        } else {
            if f_new > f {
                increases += 1;
                if increases >= DIVERGENCE_PATIENCE {
                    return Err(Error::Diverged { steps: increases, value: f_new });
                }
            } else {
                increases = 0;
            }
        }
        previous = Some((std::mem::replace(&mut w, trial.clone()), std::mem::replace(&mut g, g_new)));
        f = f_new;
    }
    unreachable!("loop returns at max_iters")
}
