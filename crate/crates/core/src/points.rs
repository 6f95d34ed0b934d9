use crate::error::{Error, Result};

/// A row-major collection of equal-length real vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Points {
    dim: usize,
    values: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("point dimension must be at least 1".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!("{} values do not split into rows of {dim}", values.len())));
        }
        Ok(Self { dim, values })
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        assert!(dim > 0, "point dimension must be at least 1");
        Self { dim, values: Vec::with_capacity(dim * rows) }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("rows"))?;
        let dim = first.len();
        let mut values = Vec::with_capacity(dim * rows.len());
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            values.extend_from_slice(row);
        }
        Self::new(dim, values)
    }

    /// One-dimensional points.
    pub fn from_scalars(xs: &[f64]) -> Self {
        Self { dim: 1, values: xs.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.dim, "row dimension");
        self.values.extend_from_slice(row);
    }

    pub fn truncate(&mut self, rows: usize) {
        self.values.truncate(rows * self.dim);
    }

    /// Rows in the given order.
    pub fn select(&self, order: &[usize]) -> Self {
        let mut out = Self::with_capacity(self.dim, order.len());
        for &i in order {
            out.push(self.row(i));
        }
        out
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Row-wise concatenation `[a_i, b_i]`.
    pub fn concat_columns(a: &Points, b: &Points) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
        }
        let mut out = Self::with_capacity(a.dim + b.dim, a.len());
        for (ra, rb) in a.rows().zip(b.rows()) {
            out.values.extend_from_slice(ra);
            out.values.extend_from_slice(rb);
        }
        Ok(out)
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut mean = vec![0.0; self.dim];
        for r in self.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Unbiased per-column variances.
    pub fn column_variances(&self) -> Vec<f64> {
        let mean = self.column_means();
        let mut var = vec![0.0; self.dim];
        for r in self.rows() {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(r) {
                *v += (x - m) * (x - m);
            }
        }
        let denom = (self.len() as f64 - 1.0).max(1.0);
        var.iter_mut().for_each(|v| *v /= denom);
        var
    }
}

/// Mean and standard error of a slice of per-sample values.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `log(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}
