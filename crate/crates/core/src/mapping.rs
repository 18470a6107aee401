//! Affine least-squares map from the new feature space back to the old one.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

/// `psi(x) = M x + c`, mapping `d2`-dimensional vectors to `d1` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    matrix: DMatrix<f64>,
    intercept: DVector<f64>,
    ridge: f64,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>, intercept: DVector<f64>, ridge: f64) -> Result<Self> {
        check_dim(matrix.nrows(), intercept.len(), "intercept")?;
        Ok(Self {
            matrix,
            intercept,
            ridge,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
            intercept: DVector::zeros(dim),
            ridge: 0.0,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn intercept(&self) -> &DVector<f64> {
        &self.intercept
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Input dimension `d2`.
    pub fn source_dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Output dimension `d1`.
    pub fn target_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.source_dim(), x.len(), "apply_mapping")?;
        let x = DVector::from_column_slice(x);
        Ok((&self.matrix * x + &self.intercept).iter().copied().collect())
    }
}

/// Ridge used when none is configured: `1e-6` times the mean squared norm
/// per source coordinate of the centered inputs.
pub fn default_ridge(pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let n = pairs.len();
    if n == 0 {
        return 0.0;
    }
    let d2 = pairs[0].0.len().max(1);
    let mean: Vec<f64> = (0..pairs[0].0.len())
        .map(|j| pairs.iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
        .collect();
    let trace: f64 = pairs
        .iter()
        .map(|(x, _)| x.iter().zip(&mean).map(|(a, m)| (a - m) * (a - m)).sum::<f64>())
        .sum();
    let scaled = 1e-6 * trace / d2 as f64;
    if scaled > 0.0 {
        scaled
    } else {
        1e-6
    }
}

/// Fits `M, c` minimizing `sum |M x2 + c - x1|^2 + ridge |M|_F^2` over
/// `(x2, x1)` pairs. The intercept is not penalized.
pub fn fit_mapping(pairs: &[(Vec<f64>, Vec<f64>)], ridge: f64) -> Result<LinearMap> {
    let Some((first2, first1)) = pairs.first() else {
        return Err(Error::Input("mapping needs at least one (x2, x1) pair".into()));
    };
    if !(ridge >= 0.0) {
        return Err(Error::Config(format!("ridge must be nonnegative, got {ridge}")));
    }
    let (d2, d1) = (first2.len(), first1.len());
    for (x2, x1) in pairs {
        check_dim(d2, x2.len(), "mapping source")?;
        check_dim(d1, x1.len(), "mapping target")?;
    }
    let n = pairs.len();
    let x = DMatrix::from_fn(n, d2, |i, j| pairs[i].0[j]);
    let y = DMatrix::from_fn(n, d1, |i, j| pairs[i].1[j]);
    let mean_x = x.row_mean();
    let mean_y = y.row_mean();
    let mut xc = x.clone();
    let mut yc = y.clone();
    for mut row in xc.row_iter_mut() {
        row -= &mean_x;
    }
    for mut row in yc.row_iter_mut() {
        row -= &mean_y;
    }

    // Solve for W = M^T (d2 x d1).
    let w = if ridge > 0.0 {
        let system = xc.transpose() * &xc + DMatrix::<f64>::identity(d2, d2) * ridge;
        let rhs = xc.transpose() * &yc;
        system
            .cholesky()
            .map(|ch| ch.solve(&rhs))
            .ok_or_else(|| Error::Numerical(format!("ridge system (ridge {ridge}) is not positive definite")))?
    } else {
        let svd = xc.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let tol = smax * (n.max(d2) as f64) * f64::EPSILON;
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        if rank < d2 {
            return Err(Error::Numerical(format!(
                "least-squares system has rank {rank} < {d2} from {n} pairs; use ridge > 0"
            )));
        }
        svd.solve(&yc, tol).map_err(|e| Error::Numerical(e.to_string()))?
    };
    let matrix = w.transpose();
    let intercept = (mean_y - mean_x * &w).transpose();
    Ok(LinearMap {
        matrix,
        intercept,
        ridge,
    })
}
