use contrastive::boed::*;
use contrastive::distributions::{Density, Gaussian};
use contrastive::ratio::{fit_ratio, LogRatioModel};
use contrastive::sbi::{GaussianPrior, LinearGaussianSimulator, PosteriorGrid, Prior, Simulator};
use contrastive::Error;
use std::sync::Arc;

fn linear_problem_parts() -> (LinearGaussianSimulator, GaussianPrior) {
    (LinearGaussianSimulator::default(), GaussianPrior::standard(1))
}

#[test]
fn oracle_bound_increases_with_design_and_matches_quadrature() {
    let (sim, prior) = linear_problem_parts();
    let mut previous = f64::NEG_INFINITY;
    for d in [0.0, 0.5, 1.0] {
        let obj = jsd_design_objective(&sim, &prior, &[d], &linear_gaussian_oracle_ratio(d), 100_000, 1).unwrap();
        let truth = linear_gaussian_jsd(d).unwrap();
        assert!((obj.bound - truth).abs() < 3.0 * obj.std_error, "d = {d}: {} vs {truth}", obj.bound);
        assert!(obj.bound > previous);
        previous = obj.bound;
    }
}

#[test]
fn fitted_bound_never_beats_the_oracle() {
    let (sim, prior) = linear_problem_parts();
    let factory = standardized_factory("quadratic", 0, 0);
    for d in [0.3, 1.0] {
        let train = design_banks(&sim, &prior, &[d], 5_000, 2).unwrap();
        let init = factory.model(train.data()).unwrap();
        let fit = fit_ratio(&init, Arc::new(train), &Default::default()).unwrap();
        let fitted = jsd_design_objective(&sim, &prior, &[d], &fit.model, 50_000, 3).unwrap();
        let oracle = jsd_design_objective(&sim, &prior, &[d], &linear_gaussian_oracle_ratio(d), 50_000, 3).unwrap();
        assert!(fitted.bound <= oracle.bound + 3.0 * oracle.std_error);
        assert!(fitted.bound <= linear_gaussian_jsd(d).unwrap() + 3.0 * fitted.std_error);
    }
}

#[test]
fn common_random_numbers_are_bit_identical() {
    let (sim, prior) = linear_problem_parts();
    let h = linear_gaussian_oracle_ratio(0.5);
    let a = jsd_design_objective(&sim, &prior, &[0.5], &h, 1_000, 9).unwrap();
    let b = jsd_design_objective(&sim, &prior, &[0.5], &h, 1_000, 9).unwrap();
    assert_eq!(a, b);
    assert!(a.gradient.is_empty());
}

fn linear_grid_trace(budget: usize, seed: u64) -> MiTrace {
    let (sim, prior) = linear_problem_parts();
    let space = DesignSpace::linspace(-1.0, 1.0, 11).unwrap();
    let factory = standardized_factory("quadratic", 0, 0);
    let problem = DesignProblem {
        simulator: &sim,
        prior: &prior,
        space: &space,
        factory: &factory,
        settings: StrategySettings::default(),
    };
    concurrent_design_optimise(&problem, "grid-refit", budget, seed).unwrap()
}

#[test]
fn grid_refit_finds_the_boundary() {
    let trace = linear_grid_trace(11 * 2 * 20_000, 4);
    assert_eq!(trace.entries.len(), 11);
    assert!(trace.final_design[0].abs() == 1.0, "{:?}", trace.final_design);
    let centre = &trace.entries[5];
    assert_eq!(centre.design, vec![0.0]);
    assert!(centre.bound.abs() < 3.0 * centre.std_error, "{centre:?}");
    let mi_argmax = [-1.0, 1.0];
    assert!(mi_argmax.contains(&trace.final_design[0]));
    assert!(trace.simulations <= 11 * 2 * 20_000);
}

#[test]
fn alternating_ascent_reaches_the_boundary() {
    let (sim, prior) = linear_problem_parts();
    let space = DesignSpace::linspace(-1.0, 1.0, 11).unwrap();
    let factory = standardized_factory("quadratic", 0, 0);
    let settings = StrategySettings { start: Some(vec![0.3]), bank_size: 5_000, ..StrategySettings::default() };
    let problem = DesignProblem { simulator: &sim, prior: &prior, space: &space, factory: &factory, settings };
    let trace = concurrent_design_optimise(&problem, "alternating-ascent", 30 * 15_000, 5).unwrap();
    assert!(trace.final_design[0].abs() >= 0.9, "{:?}", trace.entries);
    assert!(trace.entries.iter().all(|e| e.bound.is_finite() && e.design[0].abs() <= 1.0));
}

#[test]
fn single_point_space_returns_that_point() {
    let (sim, prior) = linear_problem_parts();
    let space = DesignSpace::linspace(0.4, 0.4, 1).unwrap();
    let factory = standardized_factory("quadratic", 0, 0);
    let problem = DesignProblem {
        simulator: &sim,
        prior: &prior,
        space: &space,
        factory: &factory,
        settings: StrategySettings::default(),
    };
    let trace = concurrent_design_optimise(&problem, "grid-refit", 4_000, 6).unwrap();
    assert_eq!(trace.final_design, vec![0.4]);
    assert_eq!(trace.final_bound, trace.entries[0].bound);
}

#[test]
fn budget_and_name_errors() {
    let (sim, prior) = linear_problem_parts();
    let space = DesignSpace::linspace(-1.0, 1.0, 11).unwrap();
    let factory = standardized_factory("quadratic", 0, 0);
    let problem = DesignProblem {
        simulator: &sim,
        prior: &prior,
        space: &space,
        factory: &factory,
        settings: StrategySettings::default(),
    };
    assert!(matches!(concurrent_design_optimise(&problem, "grid-refit", 10, 0), Err(Error::BudgetExhausted { .. })));
    assert!(matches!(
        concurrent_design_optimise(&problem, "alternating-ascent", 10, 0),
        Err(Error::BudgetExhausted { .. })
    ));
    assert!(matches!(concurrent_design_optimise(&problem, "bayes-opt", 10_000, 0), Err(Error::UnknownName { .. })));
}

#[test]
fn nested_mc_matches_closed_form() {
    let prior = GaussianPrior::standard(1);
    let one = nested_mc_mi_oracle(&LinearGaussianObservation, &prior, &[1.0], 2_000, 2_000, 7).unwrap();
    assert!((one.mi - linear_gaussian_mi(1.0)).abs() < 3.0 * one.std_error, "{one:?}");
    let zero = nested_mc_mi_oracle(&LinearGaussianObservation, &prior, &[0.0], 2_000, 2_000, 8).unwrap();
    assert!(zero.mi.abs() < 3.0 * zero.std_error.max(1e-12), "{zero:?}");
}

#[test]
fn sir_time_zero_carries_no_information() {
    let config = SirConfig::default();
    let sim = SirSimulator::new(config.clone(), 1).unwrap();
    let prior = config.prior().unwrap();
    let factory = standardized_factory("quadratic", 0, 0);
    let train = design_banks(&sim, &prior, &[0.0], 5_000, 10).unwrap();
    let fit = fit_ratio(&factory.model(train.data()).unwrap(), Arc::new(train), &Default::default()).unwrap();
    let obj = jsd_design_objective(&sim, &prior, &[0.0], &fit.model, 5_000, 11).unwrap();
    assert!(obj.bound.abs() < 3.0 * obj.std_error.max(1e-12), "{obj:?}");
}

#[test]
fn appending_a_measurement_does_not_lose_information() {
    let config = SirConfig::default();
    let prior = config.prior().unwrap();
    let one = BinnedSir::new(SirSimulator::new(config.clone(), 1).unwrap(), 4, 400);
    let two = BinnedSir::new(SirSimulator::new(config.clone(), 2).unwrap(), 4, 400);
    let a = nested_mc_mi_oracle(&one, &prior, &[1.8], 200, 200, 12).unwrap();
    let b = nested_mc_mi_oracle(&two, &prior, &[1.8, 2.7], 200, 200, 12).unwrap();
    let combined = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!(b.mi >= a.mi - 3.0 * combined, "{a:?} {b:?}");
}

#[test]
fn zero_ratio_posterior_is_the_prior() {
    let config = SirConfig::default();
    let prior = config.prior().unwrap();
    let post = posterior_at_design(&LogRatioModel::fixed(4, |_| 0.0), &prior, &[0.1, 0.2], 30).unwrap();
    let w = post.weights()[0];
    assert!(post.weights().iter().all(|v| (v - w).abs() < 1e-15));
}

#[test]
fn linear_posterior_at_chosen_design_is_conjugate() {
    let trace = linear_grid_trace(11 * 2 * 20_000, 13);
    let d = trace.final_design[0];
    let prior = GaussianPrior::standard(1);
    let x_obs = 0.8;
    let post = posterior_at_design(&trace.final_model, &prior, &[x_obs], 400).unwrap();
    let v = 1.0 / (1.0 + d * d);
    let conjugate = Gaussian::univariate(d * x_obs * v, v.sqrt()).unwrap();
    let truth = PosteriorGrid::from_log_weights(&prior.support(), 400, |t| conjugate.log_density(t)).unwrap();
    assert!(post.total_variation(&truth).unwrap() < 0.05);
}

#[test]
fn trace_csv_layout() {
    let trace = linear_grid_trace(11 * 2 * 200, 14);
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("iteration,d_0,bound,std_error"));
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn design_vector_constraints() {
    assert!(DesignVector::new(vec![0.5, 0.2], 0.0, 1.0, true).is_err());
    assert!(DesignVector::new(vec![1.5], 0.0, 1.0, false).is_err());
    let p = DesignVector::projected(vec![1.5, -0.2], 0.0, 1.0, true);
    assert_eq!(p.values(), &[0.0, 1.0]);
    assert!(DesignSpace::new(0.0, 3.0, false, vec![vec![3.5]]).is_err());
}

#[test]
fn sir_audit_is_shared_by_clones() {
    let sim = SirSimulator::new(SirConfig::default(), 2).unwrap();
    let copy = sim.clone();
    for seed in 0..25 {
        sim.run(&[2.0, 0.4], &[1.0, 2.5], seed).unwrap();
        copy.run(&[0.5, 1.0], &[3.0, 0.0], seed).unwrap();
    }
    assert_eq!(sim.audit().trajectories(), 50);
    assert_eq!(copy.audit().violations(), 0);
}

#[test]
fn small_sir_experiment_is_consistent() {
    let config = SirExperimentConfig {
        times: vec![0.6, 1.8, 3.0],
        budget: 6_000,
        replicates: 3,
        oracle: OracleSettings { bins: 4, replicates: 20, n_outer: 20, n_inner: 20 },
        posterior_bank: 1_000,
        posterior_resolution: 12,
        posterior_optimizer: Default::default(),
        ..Default::default()
    };
    let result = sir_design_experiment(&config).unwrap();
    assert_eq!(result.trace.entries.len(), 3);
    assert_eq!(result.oracle.len(), 3);
    assert!(result.chosen_index < 3 && result.oracle_argmax < 3);
    assert_eq!(result.checks.len(), 3);
    assert_eq!(result.conservation_violations, 0);
    assert!(result.trajectories >= 6_000);
    assert_eq!(result.posterior.weights().len(), 144);
    // uniform prior on [0, 3] x [0, 1.5]: sd = width / sqrt(12)
    let expected = ((0.5f64 / (3.0 / 12f64.sqrt())).powi(2) + (0.45f64 / (1.5 / 12f64.sqrt())).powi(2)).sqrt();
    assert!((result.checks[0].prior_mean_distance - expected).abs() < 1e-12);
}
