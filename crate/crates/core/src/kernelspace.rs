//! Gaussian kernels and graph edge weights.
//!
//! The same Gaussian form serves two roles: the reproducing kernel of a
//! predictor's function space and the edge weight of the similarity graph
//! used by the manifold penalty. Each role gets its own [`KernelConfig`], so
//! the two bandwidths can differ.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};

/// Gaussian kernel `exp(-|a - b|^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    bandwidth: f64,
}

impl KernelConfig {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::Config(format!(
                "kernel bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Unchecked evaluation; callers guarantee equal dimensions.
    #[inline]
    pub(crate) fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        (-squared_distance(a, b) / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Evaluates the kernel between two feature vectors.
pub fn kernel_eval(cfg: &KernelConfig, a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len(), "kernel_eval")?;
    Ok(cfg.eval(a, b))
}

/// Symmetric Gram matrix with entries `k(points[s], points[t])`.
pub fn gram_matrix<P: AsRef<[f64]>>(cfg: &KernelConfig, points: &[P]) -> Result<DMatrix<f64>> {
    let dim = points.first().map_or(0, |p| p.as_ref().len());
    for p in points {
        check_dim(dim, p.as_ref().len(), "gram_matrix")?;
    }
    let n = points.len();
    let mut g = DMatrix::<f64>::identity(n, n);
    for s in 0..n {
        for t in (s + 1)..n {
            let k = cfg.eval(points[s].as_ref(), points[t].as_ref());
            g[(s, t)] = k;
            g[(t, s)] = k;
        }
    }
    Ok(g)
}

/// Rectangular kernel matrix with rows indexed by `rows` and columns by `cols`.
pub(crate) fn cross_gram<P: AsRef<[f64]>, Q: AsRef<[f64]>>(
    cfg: &KernelConfig,
    rows: &[P],
    cols: &[Q],
) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        cfg.eval(rows[i].as_ref(), cols[j].as_ref())
    })
}

/// Median pairwise Euclidean distance over the first `min(limit, len)` points.
///
/// Returns `None` when fewer than two points are available or every pair
/// coincides.
pub fn median_heuristic<P: AsRef<[f64]>>(points: &[P], limit: usize) -> Option<f64> {
    let pts = &points[..points.len().min(limit)];
    let mut dists = Vec::with_capacity(pts.len() * pts.len().saturating_sub(1) / 2);
    for s in 0..pts.len() {
        for t in (s + 1)..pts.len() {
            dists.push(squared_distance(pts[s].as_ref(), pts[t].as_ref()).sqrt());
        }
    }
    if dists.is_empty() {
        return None;
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let med = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    (med > 0.0).then_some(med)
}
