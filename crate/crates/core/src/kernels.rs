//! Kernel specifications, Gram matrices and bandwidth heuristics.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A reproducing kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `K(a, b) = exp(-||a - b||^2 / sigma^2)`.
    Rbf { sigma: f64 },
    /// `K(a, b) = a'b`.
    Linear,
}

impl KernelSpec {
    pub fn rbf(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("rbf sigma must be positive, got {sigma}")));
        }
        Ok(KernelSpec::Rbf { sigma })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { sigma } => Self::rbf(sigma).map(|_| ()),
            KernelSpec::Linear => Ok(()),
        }
    }

    pub fn eval(&self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match *self {
            KernelSpec::Rbf { sigma } => (-sq_dist(a, b) / (sigma * sigma)).exp(),
            KernelSpec::Linear => a.dot(&b),
        }
    }
}

pub(crate) fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Kernel matrix between two point sets (rows are points).
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: Array2<f64>,
    /// True when built from the same point set on both sides.
    pub square: bool,
}

/// `entries[i][j] = K(a_i, b_j)`.
pub fn gram(spec: &KernelSpec, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<GramMatrix> {
    spec.validate()?;
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::InvalidInput("gram needs nonempty point sets".into()));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch { expected: a.ncols(), found: b.ncols() });
    }
    let mut entries = Array2::zeros((a.nrows(), b.nrows()));
    for (i, ai) in a.axis_iter(Axis(0)).enumerate() {
        for (j, bj) in b.axis_iter(Axis(0)).enumerate() {
            entries[[i, j]] = spec.eval(ai, bj);
        }
    }
    Ok(GramMatrix { entries, square: false })
}

/// Symmetric Gram matrix of one point set; fills the lower triangle by mirroring.
pub fn gram_square(spec: &KernelSpec, x: ArrayView2<f64>) -> Result<GramMatrix> {
    spec.validate()?;
    if x.nrows() == 0 {
        return Err(Error::InvalidInput("gram needs a nonempty point set".into()));
    }
    let n = x.nrows();
    let mut entries = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = spec.eval(x.row(i), x.row(j));
            entries[[i, j]] = v;
            entries[[j, i]] = v;
        }
    }
    Ok(GramMatrix { entries, square: true })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Median distance over all (positive, negative) pairs of training points.
pub fn sigma_median_between_classes(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<f64> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), found: y.len() });
    }
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] > 0.0).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| y[i] < 0.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass("median bandwidth needs both classes".into()));
    }
    let mut d = Vec::with_capacity(pos.len() * neg.len());
    for &i in &pos {
        for &j in &neg {
            d.push(dist(x.row(i), x.row(j)));
        }
    }
    let s = median(d);
    if s > 0.0 {
        Ok(s)
    } else {
        Err(Error::ZeroBandwidth("median cross-class distance is zero".into()))
    }
}

/// Mean distance over all unordered pairs of points.
pub fn sigma_mean_pairwise(x: ArrayView2<f64>) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidInput("mean pairwise distance needs at least two points".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += dist(x.row(i), x.row(j));
        }
    }
    let s = total / (n * (n - 1) / 2) as f64;
    if s > 0.0 {
        Ok(s)
    } else {
        Err(Error::ZeroBandwidth("all points are identical".into()))
    }
}
