//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p contrastive-cli --test acceptance`.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use contrastive::boed::{
    concurrent_design_optimise, linear_gaussian_mi, sir_design_experiment, standardized_factory, DesignProblem,
    DesignSpace, SirExperimentConfig, StrategySettings,
};
use contrastive::distributions::{jsd_quadrature, Density, Gaussian, ReferenceDistribution, Sampler, LN_2PI};
use contrastive::nce::{large_nu_gradient_check, mle_gradient_equivalence_check, EnergyModel, GaussianEnergy};
use contrastive::optimize::{finite_difference_check, OptimizerConfig};
use contrastive::points::median;
use contrastive::quadrature::Integrator;
use contrastive::ratio::{
    family_by_name, fit_ratio, jsd_from_loss, logistic_loss, LabeledTwoSample, LogRatioModel, LogisticObjective, Mlp,
    RatioFamily, TWO_LN_2,
};
use contrastive::rng;
use contrastive::sbi::{GaussianPrior, LinearGaussianSimulator};
use contrastive::tre::{chasm_experiment, linear_combination_scale, summarise_chasm, uniform_schedule, ChasmConfig};
use contrastive_cli::experiments::{lfire_experiment, nce_replicates, LfireConfig, NceExperimentConfig};
use contrastive_cli::output::TIMING;
use rand::Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn normal(mean: f64, sd: f64) -> Gaussian {
    Gaussian::univariate(mean, sd).unwrap()
}

fn toy() -> Arc<dyn EnergyModel> {
    Arc::new(GaussianEnergy::new(1))
}

fn log_z(sigma: f64) -> f64 {
    0.5 * (LN_2PI + 2.0 * sigma.ln())
}

fn loss_calibration() -> Outcome {
    let zero = LogRatioModel::zeros(family_by_name("linear", 2, 0).unwrap());
    let mut worst: f64 = 0.0;
    for (i, n) in [1usize, 7, 100, 10_000].into_iter().enumerate() {
        let p = Gaussian::new(vec![0.0, 5.0], vec![1.0, 0.1]).unwrap();
        let q = Gaussian::new(vec![-3.0, 1.0], vec![4.0, 2.0]).unwrap();
        let s = LabeledTwoSample::new(p.sample(n, rng::derive(1, i as u64)), q.sample(n, rng::derive(2, i as u64)))
            .unwrap();
        worst = worst.max((logistic_loss(&zero, &s).unwrap().loss - TWO_LN_2).abs());
    }
    outcome(worst < 1e-12, format!("max |J(0) - 2 log 2| = {worst:.2e} (tol 1e-12)"))
}

fn gradient_suite() -> Outcome {
    let mut r = rng::rng(2024);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let dim = 1 + trial % 3;
        let family: Arc<dyn RatioFamily> =
            if trial % 2 == 0 { family_by_name("quadratic", dim, 0).unwrap() } else { Arc::new(Mlp::new(dim, 5)) };
        let p = Gaussian::isotropic(dim, 1.0).unwrap();
        let q = Gaussian::new(vec![0.5; dim], vec![1.5; dim]).unwrap();
        let s = LabeledTwoSample::new(p.sample(100, r.random()), q.sample(150, r.random())).unwrap();
        let w: Vec<f64> = (0..family.n_params()).map(|_| r.random_range(-0.8..0.8)).collect();
        let objective = LogisticObjective::new(family, Arc::new(s)).unwrap();
        worst = worst.max(finite_difference_check(&objective, &w, 1e-6));
    }
    outcome(worst < 1e-4, format!("max relative error over 20 models = {worst:.2e} (tol 1e-4)"))
}

fn ratio_recovery() -> Outcome {
    let (p, q) = (normal(0.0, 1.0), normal(0.0, 2.0));
    let n = 100_000;
    let train = LabeledTwoSample::new(p.sample(n, 31), q.sample(n, 32)).unwrap();
    let init = LogRatioModel::zeros(family_by_name("quadratic", 1, 0).unwrap());
    let fit = fit_ratio(&init, Arc::new(train), &OptimizerConfig::default()).unwrap();
    let grid: Vec<f64> = (0..=800).map(|i| -4.0 + 0.01 * i as f64).collect();
    let mae = grid
        .iter()
        .map(|&x| (fit.model.evaluate(&[x]) - (p.log_density(&[x]) - q.log_density(&[x]))).abs())
        .sum::<f64>()
        / grid.len() as f64;
    let held_out = LabeledTwoSample::new(p.sample(n, 33), q.sample(n, 34)).unwrap();
    let report = logistic_loss(&fit.model, &held_out).unwrap();
    let estimate = jsd_from_loss(&report).unwrap();
    let truth = jsd_quadrature(&|x| p.log_density(x), &|x| q.log_density(x), &Integrator::for_scale(2.0)).unwrap();
    let z = (estimate - truth).abs() / report.std_error;
    outcome(
        mae < 0.05 && z < 3.0,
        format!("MAE on [-4, 4] = {mae:.4} (tol 0.05); JSD {estimate:.5} vs quadrature {truth:.5}, {z:.2} SE (tol 3)"),
    )
}

fn nce_consistency() -> Outcome {
    let rows = nce_replicates(&NceExperimentConfig::default()).unwrap();
    let sigma = median(&rows.iter().map(|r| r.estimate.theta_hat[0]).collect::<Vec<_>>());
    let norm = median(&rows.iter().map(|r| r.normalisation_error.abs()).collect::<Vec<_>>());
    outcome(
        (1.95..=2.05).contains(&sigma) && norm < 0.05,
        format!("20-seed median sigma = {sigma:.4} (in [1.95, 2.05]); median |c + log sqrt(2 pi sigma^2)| = {norm:.2e} (tol 0.05)"),
    )
}

fn mle_equivalence() -> Outcome {
    let data = normal(0.0, 2.0).sample(100_000, 51);
    let mut details = Vec::new();
    let mut all = true;
    for (i, sigma_t) in [1.0, 1.5, 2.0, 2.5, 3.0].into_iter().enumerate() {
        let r =
            mle_gradient_equivalence_check(toy(), &data, &[sigma_t], -log_z(sigma_t), 100_000, 60 + i as u64).unwrap();
        let z = (r.nce_gradient[0] - r.scale * r.exact_neg_loglik_gradient[0]).abs() / r.std_error[0];
        all &= r.agrees == Some(true);
        details.push(format!("{sigma_t}: {z:.2}"));
    }
    outcome(all, format!("|NCE - nu/(1+nu) MLE gradient| in SE at sigma_t {} (tol 3)", details.join(", ")))
}

fn large_nu_limit() -> Outcome {
    let data = normal(0.0, 2.0).sample(1_000, 61);
    let reference: Arc<dyn ReferenceDistribution> = Arc::new(normal(0.0, 3.0));
    let rows = large_nu_gradient_check(toy(), &[1.8], &data, reference, &[1.0, 10.0, 100.0, 1000.0], 62).unwrap();
    let devs: Vec<String> = rows.iter().map(|r| format!("{:.2e}", r.deviation)).collect();
    let decreasing = rows.windows(2).all(|w| w[1].deviation < w[0].deviation);
    outcome(decreasing, format!("deviation over nu = 1, 10, 100, 1000: {} (strictly decreasing)", devs.join(", ")))
}

fn telescoping() -> Outcome {
    let (d, alpha) = (10, 8.0);
    let test = Gaussian::isotropic(d, alpha).unwrap().sample(500, 71);
    let mut details = Vec::new();
    let mut worst: f64 = 0.0;
    for k in [1, 4, 8] {
        let laws: Vec<Gaussian> = uniform_schedule(k)
            .iter()
            .map(|a| Gaussian::isotropic(d, linear_combination_scale(*a, 1.0, alpha)).unwrap())
            .collect();
        let err = test
            .rows()
            .map(|x| {
                let telescoped: f64 = laws.windows(2).map(|w| w[0].log_density(x) - w[1].log_density(x)).sum();
                (telescoped - (laws[0].log_density(x) - laws[k + 1].log_density(x))).abs()
            })
            .fold(0.0, f64::max);
        worst = worst.max(err);
        details.push(format!("K={k}: {err:.1e}"));
    }
    outcome(worst < 1e-12, format!("max pointwise error {} (tol 1e-12)", details.join(", ")))
}

fn density_chasm() -> Outcome {
    let rows = chasm_experiment(&ChasmConfig::default()).unwrap();
    let summary = summarise_chasm(&rows);
    let curvature: Vec<f64> = summary.iter().map(|s| s.median_curvature_single).collect();
    let flatter = curvature.windows(2).all(|w| w[1] < w[0]);
    let last = summary.last().unwrap();
    let tre_wins = last.median_abs_error_tre < last.median_abs_error_single;
    outcome(
        flatter && tre_wins,
        format!(
            "median curvature over alpha = 2, 4, 8: {:.3e}, {:.3e}, {:.3e}; alpha = 8 median error TRE {:.4} vs single {:.4}",
            curvature[0], curvature[1], curvature[2], last.median_abs_error_tre, last.median_abs_error_single
        ),
    )
}

fn lfire_correctness() -> Outcome {
    let (_, rows) = lfire_experiment(&LfireConfig::default()).unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    for r in &rows {
        let (mean, var) = (r.posterior.mean()[0], r.posterior.variance()[0]);
        ok &= (mean - r.x_obs / 2.0).abs() < 0.05 && (var - 0.5).abs() < 0.05;
        details.push(format!("x_obs {}: mean {mean:.4}, variance {var:.4}", r.x_obs));
    }
    outcome(ok, format!("{} (targets +-0.5 and 0.5, tol 0.05; one fit)", details.join("; ")))
}

fn boed_linear() -> Outcome {
    let sim = LinearGaussianSimulator::default();
    let prior = GaussianPrior::standard(1);
    let space = DesignSpace::linspace(-1.0, 1.0, 11).unwrap();
    let factory = standardized_factory("quadratic", 0, 0);
    let problem = DesignProblem {
        simulator: &sim,
        prior: &prior,
        space: &space,
        factory: &factory,
        settings: StrategySettings::default(),
    };
    let trace = concurrent_design_optimise(&problem, "grid-refit", 11 * 2 * 20_000, 4).unwrap();
    let d_hat = trace.final_design[0];
    let mi_best = space.grid.iter().map(|d| linear_gaussian_mi(d[0])).fold(f64::NEG_INFINITY, f64::max);
    let mi_argmax: Vec<f64> = space.grid.iter().filter(|d| linear_gaussian_mi(d[0]) == mi_best).map(|d| d[0]).collect();
    let centre = trace.entries.iter().find(|e| e.design == [0.0]).unwrap();
    let z = centre.bound.abs() / centre.std_error;
    outcome(
        mi_argmax.contains(&d_hat) && d_hat.abs() == 1.0 && z < 3.0,
        format!(
            "bound argmax {d_hat}, MI argmax {mi_argmax:?}; bound at d = 0 is {:.4} ({z:.2} SE, tol 3)",
            centre.bound
        ),
    )
}

fn sir_boed() -> Outcome {
    let config = SirExperimentConfig::default();
    let start = Instant::now();
    let result = sir_design_experiment(&config).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let steps = result.chosen_index.abs_diff(result.oracle_argmax);
    let modes: Vec<f64> = result.checks.iter().map(|c| c.mode_distance).collect();
    let mode = median(&modes);
    let prior_mean = result.checks[0].prior_mean_distance;
    outcome(
        steps <= 1 && result.conservation_violations == 0 && result.trajectories > 0 && mode < prior_mean && seconds <= 1200.0,
        format!(
            "d_hat {:?} vs oracle argmax {} ({steps} steps); {} of {} trajectories broke S+I+R=N; median posterior-mode distance {mode:.3} vs prior mean {prior_mean:.3}; {seconds:.0} s",
            result.trace.final_design,
            config.times[result.oracle_argmax],
            result.conservation_violations,
            result.trajectories
        ),
    )
}

fn run_cli(experiment: &str, overrides: &[&str], out: &Path) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_contrastive"));
    cmd.args([experiment, "--seed", "12345", "--out"]).arg(out).env("RUST_LOG", "warn");
    for o in overrides {
        cmd.args(["--set", o]);
    }
    let status = cmd.status().unwrap();
    assert!(status.success(), "{experiment} failed");
}

fn same_files(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<String> =
        fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    let mut compared = 0;
    for name in names.iter().filter(|n| *n != TIMING) {
        if fs::read(a.join(name)).unwrap() != fs::read(b.join(name)).map_err(|e| format!("{name}: {e}"))? {
            return Err(format!("{name} differs"));
        }
        compared += 1;
    }
    Ok(compared)
}

fn reproducibility() -> Outcome {
    let cases: [(&str, &[&str]); 6] = [
        ("fig-loglik", &[]),
        ("chasm", &["n=1000", "replicates=3", "dim=4"]),
        ("nce", &["n=5000", "replicates=3"]),
        ("lfire", &["n=10000", "resolution=100"]),
        (
            "boed-sir",
            &[
                "budget=20000",
                "replicates=3",
                "oracle.replicates=20",
                "oracle.n_outer=30",
                "oracle.n_inner=30",
                "posterior_bank=2000",
                "posterior_resolution=20",
                "posterior_optimizer.max_iters=50",
            ],
        ),
        ("selftest", &[]),
    ];
    let dir = tempfile::tempdir().unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    for (name, overrides) in cases {
        let (a, b) = (dir.path().join(format!("{name}-a")), dir.path().join(format!("{name}-b")));
        run_cli(name, overrides, &a);
        run_cli(name, overrides, &b);
        match same_files(&a, &b) {
            Ok(n) => details.push(format!("{name} {n} files")),
            Err(e) => {
                ok = false;
                details.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(ok, format!("byte-identical (timing.json excluded): {}", details.join(", ")))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("loss calibration", loss_calibration),
        ("gradient suite", gradient_suite),
        ("ratio recovery", ratio_recovery),
        ("NCE consistency and normalisation", nce_consistency),
        ("MLE-gradient equivalence", mle_equivalence),
        ("large-nu limit", large_nu_limit),
        ("telescoping identity", telescoping),
        ("density chasm", density_chasm),
        ("LFIRE correctness", lfire_correctness),
        ("BOED argmax agreement", boed_linear),
        ("SIR BOED oracle check", sir_boed),
        ("reproducibility", reproducibility),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if filter.as_ref().is_some_and(|f| !name.contains(f.as_str()) && *f != id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let verdict = if result.passed { "PASS" } else { "FAIL" };
        failures += usize::from(!result.passed);
        println!("criterion {id:>2} [{verdict}] {name}: {} ({:.1} s)", result.detail, start.elapsed().as_secs_f64());
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
