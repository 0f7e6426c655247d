//! Dense correlation matrices and factorization: the reference path for the
//! standard power-exponential model and for cross-checking the sparse
//! pipeline at small sizes.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::correlation::ProductCorrelationModel;
use crate::{Error, Result};

/// Full `n x n` correlation matrix of a point set (rows) under a product
/// model.
pub fn build_dense_correlation(
    points: &DMatrix<f64>,
    model: &ProductCorrelationModel,
) -> Result<DMatrix<f64>> {
    if points.ncols() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "points have dimension {}, model has {}",
            points.ncols(),
            model.dim()
        )));
    }
    let n = points.nrows();
    let d = points.ncols();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let mut v = 1.0;
            for k in 0..d {
                v *= model.correlation_1d(k, (points[(i, k)] - points[(j, k)]).abs());
                if v == 0.0 {
                    break;
                }
            }
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Cross-correlation between two point sets: `a.nrows() x b.nrows()`.
pub fn build_dense_cross(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    model: &ProductCorrelationModel,
) -> Result<DMatrix<f64>> {
    if a.ncols() != model.dim() || b.ncols() != model.dim() {
        return Err(Error::DimensionMismatch(
            "cross-correlation point dimensions differ from model".into(),
        ));
    }
    let d = model.dim();
    let mut m = DMatrix::zeros(a.nrows(), b.nrows());
    for i in 0..a.nrows() {
        for j in 0..b.nrows() {
            let mut v = 1.0;
            for k in 0..d {
                v *= model.correlation_1d(k, (a[(i, k)] - b[(j, k)]).abs());
                if v == 0.0 {
                    break;
                }
            }
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

/// Dense Cholesky wrapper with the same whitening interface as the sparse
/// factor: `whiten(B) = L^{-1} B` so that `W' W = B' R^{-1} B`.
pub struct DenseCholesky {
    chol: Cholesky<f64, Dyn>,
}

impl DenseCholesky {
    /// Factors a symmetric positive definite matrix, optionally probing the
    /// smallest eigenvalue for the error report on failure.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        match Cholesky::new(matrix.clone()) {
            Some(chol) => Ok(DenseCholesky { chol }),
            None => {
                let min_eig = matrix
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                Err(Error::NonPositiveDefiniteCovariance { min_eig })
            }
        }
    }

    /// Adds `jitter` to the diagonal before factoring.
    pub fn with_jitter(mut matrix: DMatrix<f64>, jitter: f64) -> Result<Self> {
        if jitter != 0.0 {
            for i in 0..matrix.nrows() {
                matrix[(i, i)] += jitter;
            }
        }
        Self::new(matrix)
    }

    pub fn n(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn logdet(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    /// `W = L^{-1} B` by forward substitution.
    pub fn whiten(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("forward substitution with positive diagonal")
    }

    /// Full solve `R^{-1} b`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// Lower factor (copies).
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l_dirty().lower_triangle()
    }
}
