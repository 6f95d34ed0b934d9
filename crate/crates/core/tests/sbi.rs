use contrastive::distributions::{Density, Gaussian};
use contrastive::optimize::OptimizerConfig;
use contrastive::points::mean_and_se;
use contrastive::ratio::{family_by_name, LogRatioModel};
use contrastive::sbi::*;

fn quadratic_model(dim: usize) -> LogRatioModel {
    LogRatioModel::zeros(family_by_name("quadratic", dim, 0).unwrap())
}

fn true_ratio(x: f64, theta: f64) -> f64 {
    let lik = Gaussian::univariate(theta, 1.0).unwrap().log_density(&[x]);
    let evidence = Gaussian::univariate(0.0, 2.0_f64.sqrt()).unwrap().log_density(&[x]);
    lik - evidence
}

fn fitted_linear_gaussian(n: usize, seed: u64) -> LogRatioModel {
    let sim = LinearGaussianSimulator::default();
    let joint = simulate_joint(&sim, &GaussianPrior::standard(1), &[], n, seed).unwrap();
    let marginal = marginal_pairs(&joint, seed + 1).unwrap();
    lfire_amortised_fit(&joint, &marginal, &quadratic_model(2), &OptimizerConfig::default()).unwrap()
}

fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn joint_marginal_variance_adds() {
    let bank =
        simulate_joint(&LinearGaussianSimulator::default(), &GaussianPrior::standard(1), &[], 100_000, 1).unwrap();
    let xs = bank.xs.column(0);
    let var = bank.xs.column_variances()[0];
    // var of the sample variance of N(0, 2) is 2σ⁴/(n−1)
    let se = (2.0 * 4.0 / (xs.len() as f64 - 1.0)).sqrt();
    assert!((var - 2.0).abs() < 5.0 * se, "{var}");
}

#[test]
fn single_draw_is_reproducible() {
    let sim = LinearGaussianSimulator::default();
    let a = simulate_joint(&sim, &GaussianPrior::standard(1), &[], 1, 42).unwrap();
    let b = simulate_joint(&sim, &GaussianPrior::standard(1), &[], 1, 42).unwrap();
    assert_eq!(a.len(), 1);
    assert_eq!(a, b);
    assert_eq!(sim.run(&[0.3], &[], 7).unwrap(), sim.run(&[0.3], &[], 7).unwrap());
}

#[test]
fn shuffling_keeps_marginals() {
    let bank = simulate_joint(&LinearGaussianSimulator::default(), &GaussianPrior::standard(1), &[], 5_000, 2).unwrap();
    let once = marginal_pairs(&bank, 3).unwrap();
    let twice = marginal_pairs(&once, 4).unwrap();
    for shuffled in [&once, &twice] {
        assert_eq!(shuffled.xs, bank.xs);
        // two-sample critical value at the 5% level
        let critical = 1.36 * (2.0 / bank.len() as f64).sqrt();
        assert!(ks_distance(&shuffled.thetas.column(0), &bank.thetas.column(0)) < critical);
    }
}

#[test]
fn two_pairs_can_swap() {
    let bank = JointBank {
        thetas: contrastive::Points::from_scalars(&[1.0, 2.0]),
        xs: contrastive::Points::from_scalars(&[10.0, 20.0]),
        design: vec![],
        master_seed: 0,
        retries: 0,
    };
    let seed = (0..64).find(|s| marginal_pairs(&bank, *s).unwrap().thetas.column(0) == [2.0, 1.0]).unwrap();
    let swapped = marginal_pairs(&bank, seed).unwrap();
    assert_eq!(swapped.thetas.column(0), vec![2.0, 1.0]);
    assert_eq!(swapped.xs, bank.xs);
}

#[test]
fn shuffling_breaks_dependence() {
    let n = 100_000;
    let bank = simulate_joint(&LinearGaussianSimulator::default(), &GaussianPrior::standard(1), &[], n, 5).unwrap();
    let shuffled = marginal_pairs(&bank, 6).unwrap();
    let products: Vec<f64> = shuffled.thetas.column(0).iter().zip(shuffled.xs.column(0)).map(|(t, x)| t * x).collect();
    let (mean, se) = mean_and_se(&products);
    // θ and x have mean zero, so the product mean is the covariance
    assert!(mean.abs() < 3.0 * se, "{mean} ± {se}");
    let joint: Vec<f64> = bank.thetas.column(0).iter().zip(bank.xs.column(0)).map(|(t, x)| t * x).collect();
    assert!(mean_and_se(&joint).0 > 0.9);
}

#[test]
fn amortised_fit_matches_closed_form_ratio() {
    let h = fitted_linear_gaussian(100_000, 10);
    let mut errors = Vec::new();
    for i in 0..=20 {
        for j in 0..=20 {
            let (x, t) = (-2.0 + 0.2 * i as f64, -2.0 + 0.2 * j as f64);
            errors.push((h.evaluate(&[x, t]) - true_ratio(x, t)).abs());
        }
    }
    let mae = errors.iter().sum::<f64>() / errors.len() as f64;
    assert!(mae < 0.1, "mae {mae}");
}

#[test]
fn independent_simulator_gives_flat_ratio() {
    let sim = LinearGaussianSimulator::default();
    let joint = simulate_joint(&sim, &GaussianPrior::standard(1), &[0.0], 100_000, 20).unwrap();
    let marginal = marginal_pairs(&joint, 21).unwrap();
    let h = lfire_amortised_fit(&joint, &marginal, &quadratic_model(2), &OptimizerConfig::default()).unwrap();
    let mut total = 0.0;
    for i in 0..=20 {
        for j in 0..=20 {
            total += h.evaluate(&[-2.0 + 0.2 * i as f64, -2.0 + 0.2 * j as f64]);
        }
    }
    assert!((total / 441.0).abs() < 0.05);
}

#[test]
fn ratio_is_a_likelihood_ratio() {
    let h = fitted_linear_gaussian(50_000, 30);
    let evidence =
        simulate_joint(&LinearGaussianSimulator::default(), &GaussianPrior::standard(1), &[], 50_000, 31).unwrap();
    for theta in [-1.0, 0.0, 0.7] {
        let values: Vec<f64> = evidence.xs.column(0).iter().map(|x| h.evaluate(&[*x, theta]).exp()).collect();
        let (mean, se) = mean_and_se(&values);
        assert!((mean - 1.0).abs() < 3.0 * se, "theta {theta}: {mean} ± {se}");
    }
}

#[test]
fn conjugate_posterior_and_amortisation() {
    let h = fitted_linear_gaussian(100_000, 40);
    let prior = GaussianPrior::standard(1);
    for x_obs in [1.0, -1.0] {
        let post = posterior_from_ratio(&h, &prior, &[x_obs], 400).unwrap();
        assert!((post.mean()[0] - x_obs / 2.0).abs() < 0.05, "{:?}", post.mean());
        assert!((post.variance()[0] - 0.5).abs() < 0.05, "{:?}", post.variance());
        assert!((post.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_ratio_returns_the_prior() {
    let prior = GaussianPrior::standard(1);
    let h = LogRatioModel::fixed(2, |_| 0.0);
    let post = posterior_from_ratio(&h, &prior, &[0.3], 200).unwrap();
    let discretised = PosteriorGrid::from_log_weights(&prior.support(), 200, |t| prior.log_density(t)).unwrap();
    assert_eq!(post, discretised);
}

#[test]
fn oracle_ratio_gives_discretised_posterior() {
    let prior = GaussianPrior::standard(1);
    let h = LogRatioModel::fixed(2, |z| true_ratio(z[0], z[1]));
    let post = posterior_from_ratio(&h, &prior, &[1.0], 400).unwrap();
    let analytic = Gaussian::univariate(0.5, 0.5_f64.sqrt()).unwrap();
    let truth = PosteriorGrid::from_log_weights(&prior.support(), 400, |t| analytic.log_density(t)).unwrap();
    assert!(post.total_variation(&truth).unwrap() < 1e-3);
}

#[test]
fn additive_shift_leaves_posterior_unchanged() {
    let prior = GaussianPrior::standard(1);
    let base = LogRatioModel::fixed(2, |z| true_ratio(z[0], z[1]));
    let shifted = LogRatioModel::fixed(2, |z| true_ratio(z[0], z[1]) + 123.0);
    let a = posterior_from_ratio(&base, &prior, &[0.4], 100).unwrap();
    let b = posterior_from_ratio(&shifted, &prior, &[0.4], 100).unwrap();
    assert!(a.total_variation(&b).unwrap() < 1e-12);
}

#[test]
fn per_theta_cross_check_agrees() {
    let sim = LinearGaussianSimulator::default();
    let prior = GaussianPrior::new(Gaussian::univariate(0.0, 0.5).unwrap());
    let init = quadratic_model(1);
    let config = PerThetaConfig { n: 4_000, resolution: 40, optimizer: OptimizerConfig::default(), seed: 50 };
    let post = lfire_per_theta(&sim, &prior, &[], &[1.0], &init, &config).unwrap();
    // prior N(0, 0.25), x = θ + ε → posterior N(0.2, 0.2)
    assert!((post.mean()[0] - 0.2).abs() < 0.1, "{:?}", post.mean());
    assert!((post.variance()[0] - 0.2).abs() < 0.1, "{:?}", post.variance());
}

#[test]
fn csv_round_trips() {
    let bank =
        simulate_joint(&LinearGaussianSimulator::default(), &GaussianPrior::standard(1), &[0.5], 50, 60).unwrap();
    let mut buf = Vec::new();
    bank.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8_lossy(&buf).starts_with("# master_seed=60 design="));
    let back = JointBank::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, bank);

    let post = posterior_from_ratio(&LogRatioModel::fixed(2, |_| 0.0), &GaussianPrior::standard(1), &[0.0], 3).unwrap();
    let mut buf = Vec::new();
    post.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("theta_0,weight"));
    assert_eq!(text.lines().count(), 4);
}
