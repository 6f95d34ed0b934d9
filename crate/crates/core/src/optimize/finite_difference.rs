use super::Objective;

/// Central-difference gradient of `objective.value` at `point`.
pub fn finite_difference_gradient(objective: &dyn Objective, point: &[f64], step: f64) -> Vec<f64> {
    let mut w = point.to_vec();
    (0..point.len())
        .map(|i| {
            let orig = w[i];
            w[i] = orig + step;
            let up = objective.value(&w);
            w[i] = orig - step;
            let down = objective.value(&w);
            w[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Below this magnitude both gradients are treated as zero.
const MAGNITUDE_FLOOR: f64 = 1e-7;

/// Largest coordinate-wise relative error `|a - f| / max(|a|, |f|)` between
/// the analytic and central-difference gradients.
pub fn finite_difference_check(objective: &dyn Objective, point: &[f64], step: f64) -> f64 {
    let (_, analytic) = objective.value_and_gradient(point);
    let numeric = finite_difference_gradient(objective, point, step);
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(MAGNITUDE_FLOOR))
        .fold(0.0, f64::max)
}
