//! Stochastic SIR epidemic as a discrete-time binomial chain.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::sbi::{Simulator, UniformPrior};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SirConfig {
    pub population: u64,
    pub initial_infected: u64,
    pub horizon: f64,
    pub steps: usize,
    /// Uniform prior range of the infection rate.
    pub beta_range: (f64, f64),
    /// Uniform prior range of the recovery rate.
    pub gamma_range: (f64, f64),
    pub scheme: String,
}

impl Default for SirConfig {
    fn default() -> Self {
        Self {
            population: 500,
            initial_infected: 2,
            horizon: 3.0,
            steps: 200,
            beta_range: (0.0, 3.0),
            gamma_range: (0.0, 1.5),
            scheme: "binomial-chain".into(),
        }
    }
}

impl SirConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial_infected == 0 || self.initial_infected >= self.population {
            return Err(Error::InvalidArgument(format!(
                "need 0 < I0 < N, got I0 = {}, N = {}",
                self.initial_infected, self.population
            )));
        }
        if !(self.horizon > 0.0) || self.steps == 0 {
            return Err(Error::InvalidArgument("horizon and step count must be positive".into()));
        }
        if self.beta_range.0 < 0.0 || self.gamma_range.0 < 0.0 {
            return Err(Error::InvalidArgument("rate priors must be non-negative".into()));
        }
        if self.scheme != "binomial-chain" {
            return Err(Error::UnknownName {
                kind: "sir scheme",
                name: self.scheme.clone(),
                known: "binomial-chain".into(),
            });
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn prior(&self) -> Result<UniformPrior> {
        UniformPrior::new(vec![self.beta_range, self.gamma_range])
    }

    /// Index of the time step nearest to `t`.
    pub fn step_of(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::InvalidArgument(format!("design time {t} outside [0, {}]", self.horizon)));
        }
        Ok(((t / self.dt()).round() as usize).min(self.steps))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SirState {
    pub s: u64,
    pub i: u64,
    pub r: u64,
}

/// Counts simulated trajectories and those that broke `S + I + R = N`.
#[derive(Debug, Default)]
pub struct SirAudit {
    trajectories: AtomicU64,
    violations: AtomicU64,
}

impl SirAudit {
    pub fn trajectories(&self) -> u64 {
        self.trajectories.load(Ordering::Relaxed)
    }

    pub fn violations(&self) -> u64 {
        self.violations.load(Ordering::Relaxed)
    }

    fn record(&self, conserved: bool) {
        self.trajectories.fetch_add(1, Ordering::Relaxed);
        if !conserved {
            self.violations.fetch_add(1, Ordering::Relaxed);
        }
    }
}

fn chain(
    config: &SirConfig,
    beta: f64,
    gamma: f64,
    last_step: usize,
    seed: u64,
    mut visit: impl FnMut(usize, SirState),
) -> Result<bool> {
    if !(beta >= 0.0) || !(gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!("rates must be non-negative, got β = {beta}, γ = {gamma}")));
    }
    let n = config.population;
    let dt = config.dt();
    let p_recover = -(-gamma * dt).exp_m1();
    let mut r = rng::rng(seed);
    let mut state = SirState { s: n - config.initial_infected, i: config.initial_infected, r: 0 };
    let mut conserved = state.s + state.i + state.r == n;
    visit(0, state);
    for step in 1..=last_step {
        let p_infect = -(-beta * state.i as f64 * dt / n as f64).exp_m1();
        let infections = if state.s > 0 && p_infect > 0.0 {
            Binomial::new(state.s, p_infect).map_err(|e| Error::Simulation(e.to_string()))?.sample(&mut r)
        } else {
            0
        };
        let recoveries = if state.i > 0 && p_recover > 0.0 {
            Binomial::new(state.i, p_recover).map_err(|e| Error::Simulation(e.to_string()))?.sample(&mut r)
        } else {
            0
        };
        state = SirState { s: state.s - infections, i: state.i + infections - recoveries, r: state.r + recoveries };
        conserved &= state.s + state.i + state.r == n;
        visit(step, state);
    }
    Ok(conserved)
}

/// The full trajectory over all `steps + 1` grid times.
pub fn sir_trajectory(config: &SirConfig, beta: f64, gamma: f64, seed: u64) -> Result<Vec<SirState>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.steps + 1);
    chain(config, beta, gamma, config.steps, seed, |_, s| out.push(s))?;
    Ok(out)
}

/// `(I/N, R/N)` at each design time, for `θ = (β, γ)`. Clones share one audit.
#[derive(Clone, Debug)]
pub struct SirSimulator {
    config: SirConfig,
    design_dim: usize,
    audit: Arc<SirAudit>,
}

impl SirSimulator {
    pub fn new(config: SirConfig, design_dim: usize) -> Result<Self> {
        config.validate()?;
        if design_dim == 0 {
            return Err(Error::InvalidArgument("at least one design time is required".into()));
        }
        Ok(Self { config, design_dim, audit: Arc::default() })
    }

    pub fn config(&self) -> &SirConfig {
        &self.config
    }

    pub fn audit(&self) -> &SirAudit {
        &self.audit
    }
}

impl Simulator for SirSimulator {
    fn parameter_dim(&self) -> usize {
        2
    }

    fn data_dim(&self) -> usize {
        2 * self.design_dim
    }

    fn design_dim(&self) -> usize {
        self.design_dim
    }

    fn run(&self, theta: &[f64], design: &[f64], seed: u64) -> Result<Vec<f64>> {
        if design.len() != self.design_dim {
            return Err(Error::DimensionMismatch { expected: self.design_dim, found: design.len() });
        }
        let steps = design.iter().map(|t| self.config.step_of(*t)).collect::<Result<Vec<_>>>()?;
        let last = steps.iter().copied().max().unwrap_or(0);
        let n = self.config.population as f64;
        let mut out = vec![0.0; 2 * steps.len()];
        let conserved = chain(&self.config, theta[0], theta[1], last, seed, |step, state| {
            for (k, _) in steps.iter().enumerate().filter(|(_, s)| **s == step) {
                out[2 * k] = state.i as f64 / n;
                out[2 * k + 1] = state.r as f64 / n;
            }
        })?;
        self.audit.record(conserved);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conservation_on_every_step() {
        let config = SirConfig::default();
        for seed in 0..20 {
            for (beta, gamma) in [(2.5, 0.3), (0.5, 1.4), (3.0, 0.0)] {
                let traj = sir_trajectory(&config, beta, gamma, seed).unwrap();
                assert_eq!(traj.len(), 201);
                assert!(traj.iter().all(|s| s.s + s.i + s.r == 500));
            }
        }
    }

    #[test]
    fn no_infection_without_beta() {
        let traj = sir_trajectory(&SirConfig::default(), 0.0, 1.0, 3).unwrap();
        assert!(traj.iter().all(|s| s.s == 498));
        assert!(traj.windows(2).all(|w| w[1].i <= w[0].i && w[1].r >= w[0].r));
    }

    #[test]
    fn no_recovery_without_gamma() {
        let traj = sir_trajectory(&SirConfig::default(), 2.0, 0.0, 4).unwrap();
        assert!(traj.iter().all(|s| s.r == 0));
    }

    #[test]
    fn run_matches_trajectory() {
        let config = SirConfig::default();
        let sim = SirSimulator::new(config.clone(), 2).unwrap();
        let traj = sir_trajectory(&config, 1.7, 0.4, 9).unwrap();
        let x = sim.run(&[1.7, 0.4], &[1.5, 0.3], 9).unwrap();
        let (a, b) = (traj[100], traj[20]);
        assert_eq!(x, vec![a.i as f64 / 500.0, a.r as f64 / 500.0, b.i as f64 / 500.0, b.r as f64 / 500.0]);
    }

    #[test]
    fn time_zero_is_the_initial_condition() {
        let sim = SirSimulator::new(SirConfig::default(), 1).unwrap();
        for seed in 0..5 {
            assert_eq!(sim.run(&[2.9, 0.1], &[0.0], seed).unwrap(), vec![2.0 / 500.0, 0.0]);
        }
    }

    #[test]
    fn out_of_horizon_is_rejected() {
        let sim = SirSimulator::new(SirConfig::default(), 1).unwrap();
        assert!(sim.run(&[1.0, 1.0], &[3.5], 0).is_err());
        assert!(sim.run(&[1.0, 1.0], &[-0.1], 0).is_err());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = SirConfig { initial_infected: 500, ..SirConfig::default() };
        assert!(SirSimulator::new(bad, 1).is_err());
        let bad = SirConfig { scheme: "gillespie".into(), ..SirConfig::default() };
        assert!(matches!(bad.validate(), Err(Error::UnknownName { .. })));
    }
}
