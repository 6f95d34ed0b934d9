use super::RatioFamily;

/// One hidden layer of tanh units with a linear read-out:
/// `h(x) = v · tanh(W x + b) + c`.
///
/// Parameter layout: `W` row-major (`hidden x input`), then `b`, `v`, `c`.
#[derive(Clone, Debug)]
pub struct Mlp {
    input_dim: usize,
    hidden: usize,
}

impl Mlp {
    pub fn new(input_dim: usize, hidden: usize) -> Self {
        assert!(input_dim > 0 && hidden > 0);
        Self { input_dim, hidden }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], f64) {
        let (w, rest) = p.split_at(self.hidden * self.input_dim);
        let (b, rest) = rest.split_at(self.hidden);
        let (v, c) = rest.split_at(self.hidden);
        (w, b, v, c[0])
    }

    /// Small deterministic initial parameters that break hidden-unit symmetry.
    pub fn initial_params(&self, seed: u64) -> Vec<f64> {
        use rand_distr::{Distribution, StandardNormal};
        let mut r = crate::rng::rng(seed);
        let scale = 1.0 / (self.input_dim as f64).sqrt();
        let n = self.hidden * self.input_dim;
        let mut p = vec![0.0; self.n_params()];
        for w in &mut p[..n] {
            *w = scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut r);
        }
        for v in &mut p[n + self.hidden..n + 2 * self.hidden] {
            *v = 0.1 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut r);
        }
        p
    }
}

impl RatioFamily for Mlp {
    fn describe(&self) -> String {
        format!("tanh perceptron ({} -> {} -> 1)", self.input_dim, self.hidden)
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn n_params(&self) -> usize {
        self.hidden * (self.input_dim + 2) + 1
    }

    fn value(&self, params: &[f64], x: &[f64]) -> f64 {
        let (w, b, v, c) = self.split(params);
        let mut out = c;
        for k in 0..self.hidden {
            let row = &w[k * self.input_dim..(k + 1) * self.input_dim];
            let a: f64 = row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b[k];
            out += v[k] * a.tanh();
        }
        out
    }

    fn value_and_gradient(&self, params: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let (w, b, v, c) = self.split(params);
        let d = self.input_dim;
        let nw = self.hidden * d;
        let mut out = c;
        for k in 0..self.hidden {
            let row = &w[k * d..(k + 1) * d];
            let a: f64 = row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b[k];
            let t = a.tanh();
            out += v[k] * t;
            // backprop through tanh
            let delta = v[k] * (1.0 - t * t);
            for (g, xi) in grad[k * d..(k + 1) * d].iter_mut().zip(x) {
                *g = delta * xi;
            }
            grad[nw + k] = delta;
            grad[nw + self.hidden + k] = t;
        }
        grad[nw + 2 * self.hidden] = 1.0;
        out
    }
}
