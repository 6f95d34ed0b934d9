use std::sync::{Arc, LazyLock};

use rayon::prelude::*;

use super::{bound_on, design_banks, DesignProblem, MiTrace, MiTraceEntry};
use crate::error::{Error, Result};
use crate::ratio::fit_ratio;
use crate::registry::Registry;
use crate::rng;

/// A way of choosing the design that maximises the bound.
pub trait DesignStrategy: Send + Sync {
    fn optimise(&self, problem: &DesignProblem<'_>, budget: usize, seed: u64) -> Result<MiTrace>;
}

/// Fits a ratio at every grid design on one bank and scores it on a second;
/// both banks use common random numbers across designs.
pub struct GridRefit;

/// Alternates ratio descent at the current design with a central-difference
/// ascent step on the design, using fresh common-random-number banks each round.
pub struct AlternatingAscent;

static STRATEGIES: LazyLock<Registry<dyn DesignStrategy>> = LazyLock::new(|| {
    Registry::new("design strategy")
        .with("grid-refit", Arc::new(GridRefit) as Arc<dyn DesignStrategy>)
        .with("alternating-ascent", Arc::new(AlternatingAscent) as Arc<dyn DesignStrategy>)
});

pub fn strategies() -> &'static Registry<dyn DesignStrategy> {
    &STRATEGIES
}

impl DesignStrategy for GridRefit {
    fn optimise(&self, problem: &DesignProblem<'_>, budget: usize, seed: u64) -> Result<MiTrace> {
        let grid = &problem.space.grid;
        let n = budget / (2 * grid.len());
        if n < 2 {
            return Err(Error::BudgetExhausted { budget, needed: 4 * grid.len() });
        }
        let (train_seed, test_seed) = (rng::stream(seed, "train"), rng::stream(seed, "validate"));
        let results = grid
            .par_iter()
            .map(|design| {
                let train = design_banks(problem.simulator, problem.prior, design, n, train_seed)?;
                let init = problem.factory.model(train.data())?;
                let fit = fit_ratio(&init, Arc::new(train), &problem.settings.optimizer)?;
                let test = design_banks(problem.simulator, problem.prior, design, n, test_seed)?;
                Ok((bound_on(&fit.model, &test)?, fit.model))
            })
            .collect::<Result<Vec<_>>>()?;
        let entries: Vec<MiTraceEntry> = grid
            .iter()
            .zip(&results)
            .enumerate()
            .map(|(iteration, (design, (objective, _)))| MiTraceEntry {
                iteration,
                design: design.clone(),
                bound: objective.bound,
                std_error: objective.std_error,
            })
            .collect();
        let best = best_entry(&entries);
        Ok(MiTrace {
            strategy: "grid-refit".into(),
            final_design: entries[best].design.clone(),
            final_bound: entries[best].bound,
            final_std_error: entries[best].std_error,
            final_model: results[best].1.clone(),
            entries,
            simulations: 2 * n * grid.len(),
        })
    }
}

fn best_entry(entries: &[MiTraceEntry]) -> usize {
    entries
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, e)| if e.bound > acc.1 { (i, e.bound) } else { acc })
        .0
}

impl DesignStrategy for AlternatingAscent {
    fn optimise(&self, problem: &DesignProblem<'_>, budget: usize, seed: u64) -> Result<MiTrace> {
        let settings = &problem.settings;
        let n = settings.bank_size;
        let space = problem.space;
        // one training bank plus two finite-difference banks per coordinate
        let per_round = n * (1 + 2 * space.dim());
        if n < 2 || budget < per_round {
            return Err(Error::BudgetExhausted { budget, needed: per_round.max(6) });
        }
        let mut design =
            space.project(settings.start.clone().unwrap_or_else(|| space.grid[space.grid.len() / 2].clone()));
        let round_seed = rng::stream(seed, "ascent");
        let ratio_config = settings.optimizer.with_max_iters(settings.ratio_steps);
        let mut model = None;
        let mut entries = Vec::new();
        let mut best: Option<(usize, crate::ratio::LogRatioModel)> = None;
        let rounds = budget / per_round;
        for round in 0..rounds {
            let bank_seed = rng::derive(round_seed, round as u64);
            let train = design_banks(problem.simulator, problem.prior, &design, n, bank_seed)?;
            let init = match model.take() {
                Some(m) => m,
                None => problem.factory.model(train.data())?,
            };
            let fit = fit_ratio(&init, Arc::new(train.clone()), &ratio_config)?;
            let here = bound_on(&fit.model, &train)?;
            entries.push(MiTraceEntry {
                iteration: round,
                design: design.clone(),
                bound: here.bound,
                std_error: here.std_error,
            });
            if best.as_ref().is_none_or(|(i, _)| here.bound > entries[*i].bound) {
                best = Some((entries.len() - 1, fit.model.clone()));
            }

            let mut gradient = vec![0.0; design.len()];
            for (j, g) in gradient.iter_mut().enumerate() {
                let shifted = |sign: f64| -> Result<f64> {
                    let mut d = design.clone();
                    d[j] += sign * settings.fd_step;
                    let d = space.project(d);
                    let bank = design_banks(problem.simulator, problem.prior, &d, n, bank_seed)?;
                    Ok(bound_on(&fit.model, &bank)?.bound)
                };
                let (up, down) = (shifted(1.0)?, shifted(-1.0)?);
                *g = (up - down) / (2.0 * settings.fd_step);
            }
            design = space.project(design.iter().zip(&gradient).map(|(d, g)| d + settings.design_step * g).collect());
            model = Some(fit.model);
        }
        let (best, final_model) = best.expect("at least one round runs");
        Ok(MiTrace {
            strategy: "alternating-ascent".into(),
            final_design: entries[best].design.clone(),
            final_bound: entries[best].bound,
            final_std_error: entries[best].std_error,
            final_model,
            entries,
            simulations: rounds * per_round,
        })
    }
}
