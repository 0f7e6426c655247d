//! Integrated likelihood over the correlation ranges (regression
//! coefficients and marginal variance marginalized analytically), the
//! simplex prior, the adaptive Metropolis sampler, and sparsity-cutoff
//! calibration.

pub mod calibrate;
pub mod metropolis;
pub mod prior;

pub use calibrate::{calibrate_cutoff, CutoffReport};
pub use metropolis::{metropolis_run, Chain, LogTarget, McmcConfig};
pub use prior::{prior_contains, BoxPrior, ParamSupport, SimplexPrior};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::correlation::{CorrelationFamily, ProductCorrelationModel, RangeVector};
use crate::dense::{build_dense_correlation, DenseCholesky};
use crate::design::DesignMatrix;
use crate::sparsecov::{
    assemble_sparse_correlation, find_interacting_pairs, CholeskyFactor, SymbolicFactor,
};
use crate::{Error, Result};

/// Pieces of one integrated-likelihood evaluation.
#[derive(Debug, Clone)]
pub struct LikelihoodTerms {
    /// `log |Gamma(tau)|`
    pub log_det_corr: f64,
    /// `log |F' Gamma^{-1} F|`
    pub log_det_gls: f64,
    /// `(Y - F beta_hat)' Gamma^{-1} (Y - F beta_hat)`
    pub rss: f64,
    /// Generalized least squares estimate of the regression coefficients.
    pub beta_hat: DVector<f64>,
    /// `rss / (n - q)`
    pub sigma2_hat: f64,
}

/// Whitened data plus the GLS factorization, kept around for prediction.
pub(crate) struct GlsSolution {
    pub terms: LikelihoodTerms,
    pub wy: DVector<f64>,
    pub wf: DMatrix<f64>,
    pub gls_chol: Cholesky<f64, Dyn>,
}

/// Solves the generalized least squares system from whitened inputs
/// (`wy = Q'^{-1} Y`, `wf = Q'^{-1} F`).
pub(crate) fn gls_solve(log_det_corr: f64, wy: DVector<f64>, wf: DMatrix<f64>) -> Result<GlsSolution> {
    let n = wy.len();
    let q = wf.ncols();
    let m = wf.transpose() * &wf;
    let gls_chol = Cholesky::new(m).ok_or(Error::RankDeficientGls)?;
    let log_det_gls = {
        let l = gls_chol.l_dirty();
        2.0 * (0..q).map(|i| l[(i, i)].ln()).sum::<f64>()
    };
    let beta_hat = gls_chol.solve(&(wf.transpose() * &wy));
    let resid = &wy - &wf * &beta_hat;
    let rss = resid.norm_squared();
    let sigma2_hat = rss / (n - q) as f64;
    Ok(GlsSolution {
        terms: LikelihoodTerms {
            log_det_corr,
            log_det_gls,
            rss,
            beta_hat,
            sigma2_hat,
        },
        wy,
        wf,
        gls_chol,
    })
}

/// Log integrated likelihood from its terms:
/// `-1/2 log|Gamma| - 1/2 log|F' Gamma^{-1} F| - (n-q)/2 log RSS`.
pub fn integrated_loglik_value(terms: &LikelihoodTerms, n: usize, q: usize) -> f64 {
    -0.5 * terms.log_det_corr - 0.5 * terms.log_det_gls - 0.5 * (n - q) as f64 * terms.rss.ln()
}

/// Integrated-likelihood evaluator for the compactly supported model: one
/// sparse factorization per evaluation, with the symbolic analysis reused
/// whenever the neighbor structure is unchanged.
pub struct SparseGpLikelihood<'a> {
    x: &'a DesignMatrix,
    y: &'a DVector<f64>,
    f: &'a DMatrix<f64>,
    families: Vec<CorrelationFamily>,
    waiver: bool,
    jitter: f64,
    symbolic_cache: Option<SymbolicFactor>,
}

impl<'a> SparseGpLikelihood<'a> {
    pub fn new(
        x: &'a DesignMatrix,
        y: &'a DVector<f64>,
        f: &'a DMatrix<f64>,
        families: Vec<CorrelationFamily>,
        jitter: f64,
    ) -> Result<Self> {
        Self::build(x, y, f, families, jitter, false)
    }

    /// Admits truncated-power parameters outside the tabulated validity
    /// table (the waiver flag).
    pub fn new_with_waiver(
        x: &'a DesignMatrix,
        y: &'a DVector<f64>,
        f: &'a DMatrix<f64>,
        families: Vec<CorrelationFamily>,
        jitter: f64,
    ) -> Result<Self> {
        Self::build(x, y, f, families, jitter, true)
    }

    fn build(
        x: &'a DesignMatrix,
        y: &'a DVector<f64>,
        f: &'a DMatrix<f64>,
        families: Vec<CorrelationFamily>,
        jitter: f64,
        waiver: bool,
    ) -> Result<Self> {
        let (n, q) = (x.n(), f.ncols());
        if y.len() != n || f.nrows() != n {
            return Err(Error::DimensionMismatch(
                "design, response and basis row counts differ".into(),
            ));
        }
        if n <= q + 2 {
            return Err(Error::TooFewObservations { n, q });
        }
        if families.len() != x.d() {
            return Err(Error::DimensionMismatch(format!(
                "{} correlation families for a {}-dimensional design",
                families.len(),
                x.d()
            )));
        }
        if families.iter().any(|f| !f.compact_support()) {
            return Err(Error::NonCompactFamily);
        }
        Ok(SparseGpLikelihood {
            x,
            y,
            f,
            families,
            waiver,
            jitter,
            symbolic_cache: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn q(&self) -> usize {
        self.f.ncols()
    }

    fn model(&self, tau: &[f64]) -> Result<ProductCorrelationModel> {
        let ranges = RangeVector::new(tau.to_vec())?;
        if self.waiver {
            ProductCorrelationModel::new_with_waiver(self.families.clone(), ranges)
        } else {
            ProductCorrelationModel::new(self.families.clone(), ranges)
        }
    }

    /// Log integrated likelihood and its terms at the given ranges.
    pub fn evaluate(&mut self, tau: &[f64]) -> Result<(f64, LikelihoodTerms)> {
        let (value, sol, _) = self.evaluate_full(tau)?;
        Ok((value, sol.terms))
    }

    /// Full evaluation, also returning the whitened system and the factor
    /// for downstream prediction.
    pub(crate) fn evaluate_full(
        &mut self,
        tau: &[f64],
    ) -> Result<(f64, GlsSolution, CholeskyFactor)> {
        let model = self.model(tau)?;
        let pairs = find_interacting_pairs(self.x, model.ranges());
        let matrix = assemble_sparse_correlation(self.x, &model, &pairs)?;
        let reusable = self
            .symbolic_cache
            .as_ref()
            .is_some_and(|s| s.matches_pattern(&matrix));
        if !reusable {
            self.symbolic_cache = Some(SymbolicFactor::analyze(&matrix));
        }
        let factor = self
            .symbolic_cache
            .as_ref()
            .expect("cache populated above")
            .factorize(&matrix, self.jitter)?;
        let wy = DVector::from_vec(factor.solve_transposed_vec(self.y.as_slice()));
        let wf = factor.solve_transposed(self.f);
        let sol = gls_solve(factor.logdet(), wy, wf)?;
        let value = integrated_loglik_value(&sol.terms, self.n(), self.q());
        Ok((value, sol, factor))
    }
}

impl LogTarget for SparseGpLikelihood<'_> {
    fn log_density(&mut self, params: &[f64]) -> Result<f64> {
        Ok(self.evaluate(params)?.0)
    }
}

/// One-call integrated log-likelihood for the compactly supported model.
pub fn integrated_loglik(
    tau: &[f64],
    x: &DesignMatrix,
    y: &DVector<f64>,
    f: &DMatrix<f64>,
    families: &[CorrelationFamily],
    jitter: f64,
) -> Result<(f64, LikelihoodTerms)> {
    SparseGpLikelihood::new(x, y, f, families.to_vec(), jitter)?.evaluate(tau)
}

/// Integrated-likelihood evaluator for the dense power-exponential model,
/// parameterized by the per-dimension rates `phi` with the smoothness
/// `alpha` held fixed.
pub struct DenseGpLikelihood<'a> {
    points: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    f: &'a DMatrix<f64>,
    alphas: Vec<f64>,
    jitter: f64,
}

impl<'a> DenseGpLikelihood<'a> {
    pub fn new(
        points: &'a DMatrix<f64>,
        y: &'a DVector<f64>,
        f: &'a DMatrix<f64>,
        alphas: Vec<f64>,
        jitter: f64,
    ) -> Result<Self> {
        let (n, q) = (points.nrows(), f.ncols());
        if y.len() != n || f.nrows() != n {
            return Err(Error::DimensionMismatch(
                "points, response and basis row counts differ".into(),
            ));
        }
        if n <= q + 2 {
            return Err(Error::TooFewObservations { n, q });
        }
        if alphas.len() != points.ncols() {
            return Err(Error::DimensionMismatch(
                "one alpha per input dimension required".into(),
            ));
        }
        Ok(DenseGpLikelihood {
            points,
            y,
            f,
            alphas,
            jitter,
        })
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn q(&self) -> usize {
        self.f.ncols()
    }

    pub(crate) fn evaluate_full(&self, phi: &[f64]) -> Result<(f64, GlsSolution, DenseCholesky)> {
        let model = ProductCorrelationModel::power_exponential(&self.alphas, phi)?;
        let corr = build_dense_correlation(self.points, &model)?;
        let chol = DenseCholesky::with_jitter(corr, self.jitter)?;
        let wy = chol.whiten(&DMatrix::from_column_slice(self.n(), 1, self.y.as_slice()));
        let wf = chol.whiten(self.f);
        let sol = gls_solve(chol.logdet(), DVector::from_column_slice(wy.as_slice()), wf)?;
        let value = integrated_loglik_value(&sol.terms, self.n(), self.q());
        Ok((value, sol, chol))
    }

    pub fn evaluate(&self, phi: &[f64]) -> Result<(f64, LikelihoodTerms)> {
        let (value, sol, _) = self.evaluate_full(phi)?;
        Ok((value, sol.terms))
    }
}

impl LogTarget for DenseGpLikelihood<'_> {
    fn log_density(&mut self, params: &[f64]) -> Result<f64> {
        Ok(self.evaluate(params)?.0)
    }
}
