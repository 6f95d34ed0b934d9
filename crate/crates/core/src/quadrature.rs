//! Composite Gauss–Legendre quadrature on boxes of dimension one or two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes and weights of the `order`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A tensor-product composite Gauss–Legendre rule over a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integrator {
    pub ranges: Vec<(f64, f64)>,
    pub panels: usize,
    pub order: usize,
}

impl Integrator {
    /// 2048 nodes on `[lo, hi]`: 128 panels of the 16-point rule.
    pub fn line(lo: f64, hi: f64) -> Self {
        Self { ranges: vec![(lo, hi)], panels: 128, order: 16 }
    }

    /// Default for densities whose largest scale is `sigma_max`: [-12σ, 12σ].
    pub fn for_scale(sigma_max: f64) -> Self {
        Self::line(-12.0 * sigma_max, 12.0 * sigma_max)
    }

    /// 512 x 512 nodes over a rectangle.
    pub fn rectangle(x: (f64, f64), y: (f64, f64)) -> Self {
        Self { ranges: vec![x, y], panels: 32, order: 16 }
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    /// Nodes and weights along axis `axis`.
    pub fn axis(&self, axis: usize) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self.ranges[axis];
        let (gx, gw) = gauss_legendre(self.order);
        let width = (hi - lo) / self.panels as f64;
        let mut xs = Vec::with_capacity(self.panels * self.order);
        let mut ws = Vec::with_capacity(self.panels * self.order);
        for p in 0..self.panels {
            let a = lo + p as f64 * width;
            for (x, w) in gx.iter().zip(&gw) {
                xs.push(a + 0.5 * width * (x + 1.0));
                ws.push(0.5 * width * w);
            }
        }
        (xs, ws)
    }

    /// Integral of `f` over the box.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> Result<f64> {
        match self.dim() {
            1 => {
                let (xs, ws) = self.axis(0);
                Ok(xs.iter().zip(&ws).map(|(x, w)| w * f(std::slice::from_ref(x))).sum())
            }
            2 => {
                let (xs, wx) = self.axis(0);
                let (ys, wy) = self.axis(1);
                let mut total = 0.0;
                let mut point = [0.0; 2];
                for (x, a) in xs.iter().zip(&wx) {
                    point[0] = *x;
                    let mut inner = 0.0;
                    for (y, b) in ys.iter().zip(&wy) {
                        point[1] = *y;
                        inner += b * f(&point);
                    }
                    total += a * inner;
                }
                Ok(total)
            }
            d => Err(Error::InvalidArgument(format!("quadrature supports dimension 1 or 2, got {d}"))),
        }
    }

    /// Checks that `exp(log_density)` integrates to one within `tolerance`.
    pub fn check_normalised(
        &self,
        which: &'static str,
        log_density: &dyn Fn(&[f64]) -> f64,
        tolerance: f64,
    ) -> Result<f64> {
        let mass = self.integrate(|x| log_density(x).exp())?;
        if (mass - 1.0).abs() > tolerance {
            return Err(Error::Normalisation { which, value: mass, tolerance });
        }
        Ok(mass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(16);
        // Exact up to degree 31.
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((integral - 2.0 / 31.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let (x1, w1) = gauss_legendre(1);
        assert_eq!((x1[0], w1[0]), (0.0, 2.0));
    }

    #[test]
    fn gaussian_mass_is_one() {
        let q = Integrator::for_scale(2.0);
        let mass =
            q.integrate(|x| (-0.5 * x[0] * x[0] / 4.0).exp() / (2.0 * std::f64::consts::PI * 4.0).sqrt()).unwrap();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rectangle_integrates_product() {
        let q = Integrator::rectangle((0.0, 1.0), (0.0, 2.0));
        let v = q.integrate(|p| p[0] * p[1] * p[1]).unwrap();
        assert!((v - 0.5 * 8.0 / 3.0).abs() < 1e-12);
        let bad = Integrator { ranges: vec![(0.0, 1.0); 3], panels: 1, order: 2 };
        assert!(bad.integrate(|_| 1.0).is_err());
    }
}
