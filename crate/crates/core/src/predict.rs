//! Conditional multivariate-t predictive moments per posterior draw and
//! Monte Carlo reconstruction of the posterior predictive mean, variance,
//! and pointwise credible intervals.

use std::io::{BufWriter, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::correlation::ProductCorrelationModel;
use crate::dense;
use crate::design::DesignMatrix;
use crate::inference::{gls_solve, SparseGpLikelihood};
use crate::sparsecov::SolveWorkspace;
use crate::{Error, Result};

/// Sparse training-by-prediction correlations, stored by prediction column
/// as `(training index, value)` pairs; structurally zero wherever compact
/// support separates the pair.
#[derive(Debug, Clone)]
pub struct CrossCorrelation {
    n_train: usize,
    cols: Vec<Vec<(usize, f64)>>,
}

impl CrossCorrelation {
    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_pred(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.cols[j]
    }

    pub fn structural_nonzeros(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }
}

/// Correlations between training and prediction points under a compactly
/// supported model. Prediction points may lie outside the unit cube
/// (extrapolation); only separations matter.
pub fn build_cross_correlation(
    x_train: &DesignMatrix,
    x_pred: &DMatrix<f64>,
    model: &ProductCorrelationModel,
) -> Result<CrossCorrelation> {
    if !model.compact_support() {
        return Err(Error::NonCompactFamily);
    }
    if x_train.d() != model.dim() || x_pred.ncols() != model.dim() {
        return Err(Error::DimensionMismatch(
            "cross-correlation dimensions differ from model".into(),
        ));
    }
    let n = x_train.n();
    let d = x_train.d();
    let ranges = model.ranges();
    let (k_min, tau_min) = (0..d)
        .map(|k| (k, ranges[k]))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .expect("d >= 1");

    let mut sorted: Vec<(f64, usize)> = (0..n).map(|i| (x_train.coord(i, k_min), i)).collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let mut cols = Vec::with_capacity(x_pred.nrows());
    for j in 0..x_pred.nrows() {
        let center = x_pred[(j, k_min)];
        let lo = sorted.partition_point(|&(c, _)| c <= center - tau_min);
        let hi = sorted.partition_point(|&(c, _)| c < center + tau_min);
        let mut col: Vec<(usize, f64)> = Vec::new();
        for &(_, i) in &sorted[lo..hi] {
            let mut v = 1.0;
            for k in 0..d {
                v *= model.correlation_1d(k, (x_train.coord(i, k) - x_pred[(j, k)]).abs());
                if v == 0.0 {
                    break;
                }
            }
            if v != 0.0 {
                col.push((i, v));
            }
        }
        col.sort_unstable_by_key(|&(i, _)| i);
        cols.push(col);
    }
    Ok(CrossCorrelation { n_train: n, cols })
}

/// Per-draw conditional mean and pointwise variance.
#[derive(Debug, Clone)]
pub struct ConditionalMoments {
    pub mean: DVector<f64>,
    pub var: DVector<f64>,
}

/// Monte Carlo aggregate of conditional moments over posterior draws.
#[derive(Debug, Clone)]
pub struct PosteriorMoments {
    pub mean: DVector<f64>,
    pub variance: DVector<f64>,
}

/// Posterior predictive summary with pointwise credible bounds.
#[derive(Debug, Clone)]
pub struct PredictiveSummary {
    pub mean: DVector<f64>,
    pub variance: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub level: f64,
}

/// Conditional-moment engine for the compactly supported model: one sparse
/// factorization per retained draw, shared across prediction blocks.
pub struct Predictor<'a> {
    likelihood: SparseGpLikelihood<'a>,
    x: &'a DesignMatrix,
    block_size: usize,
}

impl<'a> Predictor<'a> {
    pub fn new(
        x: &'a DesignMatrix,
        y: &'a DVector<f64>,
        f: &'a DMatrix<f64>,
        families: Vec<crate::correlation::CorrelationFamily>,
        jitter: f64,
    ) -> Result<Self> {
        Ok(Predictor {
            likelihood: SparseGpLikelihood::new(x, y, f, families, jitter)?,
            x,
            block_size: 4096,
        })
    }

    /// Prediction block size; memory stays `O(n + block)`.
    pub fn with_block_size(mut self, block_size: usize) -> Self {
        self.block_size = block_size.max(1);
        self
    }

    /// Conditional mean and pointwise variance of the predictive
    /// distribution given the ranges `tau`.
    ///
    /// `x0` are prediction inputs (rows, unit-cube scale), `f0` the
    /// corresponding regression terms.
    pub fn conditional_moments(
        &mut self,
        tau: &[f64],
        x0: &DMatrix<f64>,
        f0: &DMatrix<f64>,
    ) -> Result<ConditionalMoments> {
        let n0 = x0.nrows();
        if f0.nrows() != n0 {
            return Err(Error::DimensionMismatch(
                "prediction basis rows differ from prediction points".into(),
            ));
        }
        let (_, sol, factor) = self.likelihood.evaluate_full(tau)?;
        let n = self.likelihood.n();
        let q = self.likelihood.q();
        let dof = (n - q) as f64;
        let t_factor = dof / (dof - 2.0);
        let s2 = sol.terms.sigma2_hat;

        let model = self.likelihood.model(tau)?;
        let cross = build_cross_correlation(self.x, x0, &model)?;

        let w_resid = &sol.wy - &sol.wf * &sol.terms.beta_hat;
        let wf = &sol.wf;
        let gls_chol = &sol.gls_chol;
        let beta = &sol.terms.beta_hat;

        let mut mean = vec![0.0f64; n0];
        let mut var = vec![0.0f64; n0];
        let block = self.block_size;
        mean.par_chunks_mut(block)
            .zip(var.par_chunks_mut(block))
            .enumerate()
            .for_each(|(ci, (mean_blk, var_blk))| {
                let mut ws = SolveWorkspace::new(n);
                let mut u = DVector::zeros(q);
                for off in 0..mean_blk.len() {
                    let j = ci * block + off;
                    factor.sparse_forward_solve(cross.column(j), &mut ws);
                    let g = ws.norm_squared();
                    let a = ws.dot(w_resid.as_slice());
                    for c in 0..q {
                        u[c] = f0[(j, c)];
                    }
                    for &jj in ws.pattern() {
                        let zj = ws.value(jj);
                        if zj != 0.0 {
                            for c in 0..q {
                                u[c] -= wf[(jj, c)] * zj;
                            }
                        }
                    }
                    let t = gls_chol.solve(&u);
                    let quad = u.dot(&t);
                    let mut reg = 0.0;
                    for c in 0..q {
                        reg += f0[(j, c)] * beta[c];
                    }
                    mean_blk[off] = reg + a;
                    var_blk[off] = t_factor * s2 * (1.0 - g + quad).max(0.0);
                }
            });

        Ok(ConditionalMoments {
            mean: DVector::from_vec(mean),
            var: DVector::from_vec(var),
        })
    }
}

/// Dense-path conditional moments for an arbitrary product model (used by
/// the standard power-exponential comparison and as a reference).
pub fn conditional_moments_dense(
    points: &DMatrix<f64>,
    y: &DVector<f64>,
    f: &DMatrix<f64>,
    model: &ProductCorrelationModel,
    x0: &DMatrix<f64>,
    f0: &DMatrix<f64>,
    jitter: f64,
) -> Result<ConditionalMoments> {
    let n = points.nrows();
    let q = f.ncols();
    if n <= q + 2 {
        return Err(Error::TooFewObservations { n, q });
    }
    let corr = dense::build_dense_correlation(points, model)?;
    let chol = dense::DenseCholesky::with_jitter(corr, jitter)?;
    let gamma = dense::build_dense_cross(points, x0, model)?;
    let wy = chol.whiten(&DMatrix::from_column_slice(n, 1, y.as_slice()));
    let wf = chol.whiten(f);
    let wg = chol.whiten(&gamma);
    let sol = gls_solve(chol.logdet(), DVector::from_column_slice(wy.as_slice()), wf)?;
    let dof = (n - q) as f64;
    let t_factor = dof / (dof - 2.0);
    let s2 = sol.terms.sigma2_hat;
    let w_resid = &sol.wy - &sol.wf * &sol.terms.beta_hat;

    let n0 = x0.nrows();
    let mut mean = DVector::zeros(n0);
    let mut var = DVector::zeros(n0);
    for j in 0..n0 {
        let zj = wg.column(j);
        let g = zj.norm_squared();
        let a = zj.dot(&w_resid);
        let u = f0.row(j).transpose() - sol.wf.transpose() * zj;
        let t = sol.gls_chol.solve(&u);
        let quad = u.dot(&t);
        mean[j] = f0.row(j).transpose().dot(&sol.terms.beta_hat) + a;
        var[j] = t_factor * s2 * (1.0 - g + quad).max(0.0);
    }
    Ok(ConditionalMoments { mean, var })
}

/// Combines per-draw conditional moments by iterated expectation:
/// `mean = mean(m)`, `variance = mean(v) + population variance of m`.
pub fn aggregate_predictions(moments: &[ConditionalMoments]) -> Result<PosteriorMoments> {
    if moments.is_empty() {
        return Err(Error::EmptyInput("conditional moments".into()));
    }
    let n0 = moments[0].mean.len();
    for m in moments {
        if m.mean.len() != n0 || m.var.len() != n0 {
            return Err(Error::DimensionMismatch(
                "conditional moment vectors have unequal lengths".into(),
            ));
        }
    }
    let k = moments.len() as f64;
    let mut mean = DVector::zeros(n0);
    for m in moments {
        mean += &m.mean;
    }
    mean /= k;
    let mut variance = DVector::zeros(n0);
    for m in moments {
        for j in 0..n0 {
            variance[j] += m.var[j] + (m.mean[j] - mean[j]).powi(2);
        }
    }
    variance /= k;
    Ok(PosteriorMoments { mean, variance })
}

/// Gaussian-quantile pointwise credible interval at the given level.
pub fn credible_interval(agg: &PosteriorMoments, level: f64) -> Result<PredictiveSummary> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "credible level must lie in (0, 1), got {level}"
        )));
    }
    let z = Normal::standard().inverse_cdf(0.5 * (1.0 + level));
    let half: DVector<f64> = agg.variance.map(|v| z * v.max(0.0).sqrt());
    Ok(PredictiveSummary {
        mean: agg.mean.clone(),
        variance: agg.variance.clone(),
        lower: &agg.mean - &half,
        upper: &agg.mean + &half,
        level,
    })
}

/// Exact quantiles of the t-mixture posterior predictive (one
/// location-scale t per retained draw, `dof = n - q`), found by bisection.
/// Slower than the Gaussian approximation; exposed behind an option.
pub fn credible_interval_mixture(
    moments: &[ConditionalMoments],
    dof: usize,
    level: f64,
) -> Result<PredictiveSummary> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "credible level must lie in (0, 1), got {level}"
        )));
    }
    if dof <= 2 {
        return Err(Error::InvalidArgument(
            "mixture quantiles require dof > 2".into(),
        ));
    }
    let agg = aggregate_predictions(moments)?;
    let nu = dof as f64;
    let t_dist = StudentsT::new(0.0, 1.0, nu).expect("valid dof");
    // variance v corresponds to scale sqrt(v (nu-2)/nu)
    let var_to_scale = ((nu - 2.0) / nu).sqrt();
    let n0 = agg.mean.len();
    let k = moments.len() as f64;
    let mut lower = DVector::zeros(n0);
    let mut upper = DVector::zeros(n0);
    for j in 0..n0 {
        let comps: Vec<(f64, f64)> = moments
            .iter()
            .map(|m| (m.mean[j], m.var[j].max(0.0).sqrt() * var_to_scale))
            .collect();
        let cdf = |x: f64| -> f64 {
            comps
                .iter()
                .map(|&(m, s)| {
                    if s > 0.0 {
                        t_dist.cdf((x - m) / s)
                    } else if x >= m {
                        1.0
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
                / k
        };
        let spread = agg.variance[j].sqrt().max(1e-300);
        let lo_bracket = agg.mean[j] - 50.0 * spread;
        let hi_bracket = agg.mean[j] + 50.0 * spread;
        lower[j] = bisect_quantile(&cdf, 0.5 * (1.0 - level), lo_bracket, hi_bracket);
        upper[j] = bisect_quantile(&cdf, 0.5 * (1.0 + level), lo_bracket, hi_bracket);
    }
    Ok(PredictiveSummary {
        mean: agg.mean,
        variance: agg.variance,
        lower,
        upper,
        level,
    })
}

fn bisect_quantile(cdf: &dyn Fn(f64) -> f64, p: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * (1.0 + hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Writes predictions as CSV `x1..xd, mean, variance, lower, upper` with
/// the nominal level recorded in a leading comment line.
pub fn write_predictions_csv<W: Write>(
    x_raw: &DMatrix<f64>,
    summary: &PredictiveSummary,
    w: W,
) -> Result<()> {
    let mut out = BufWriter::new(w);
    writeln!(out, "# level = {}", summary.level)?;
    let mut wtr = csv::Writer::from_writer(out);
    let d = x_raw.ncols();
    let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    header.extend(["mean", "variance", "lower", "upper"].map(String::from));
    wtr.write_record(&header)?;
    for i in 0..x_raw.nrows() {
        let mut rec: Vec<String> = (0..d).map(|k| x_raw[(i, k)].to_string()).collect();
        rec.push(summary.mean[i].to_string());
        rec.push(summary.variance[i].to_string());
        rec.push(summary.lower[i].to_string());
        rec.push(summary.upper[i].to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a predictions CSV written by [`write_predictions_csv`].
pub fn read_predictions_csv<R: std::io::Read>(r: R) -> Result<(DMatrix<f64>, PredictiveSummary)> {
    let content = std::io::read_to_string(r)?;
    let mut level = None;
    for line in content.lines() {
        if let Some(rest) = line.strip_prefix("# level =") {
            level = rest.trim().parse::<f64>().ok();
        }
    }
    let level = level.ok_or_else(|| Error::Schema("missing `# level =` comment".into()))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(content.as_bytes());
    let headers = rdr.headers()?.clone();
    let d = headers.iter().filter(|h| h.starts_with('x')).count();
    let expected: Vec<&str> = vec!["mean", "variance", "lower", "upper"];
    for (i, name) in expected.iter().enumerate() {
        if headers.get(d + i) != Some(name) {
            return Err(Error::Schema(format!("missing `{name}` column")));
        }
    }
    let mut xs = Vec::new();
    let mut mean = Vec::new();
    let mut variance = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Schema(format!("bad numeric field `{s}`")))
        };
        for k in 0..d {
            xs.push(parse(&rec[k])?);
        }
        mean.push(parse(&rec[d])?);
        variance.push(parse(&rec[d + 1])?);
        lower.push(parse(&rec[d + 2])?);
        upper.push(parse(&rec[d + 3])?);
    }
    let n = mean.len();
    let x = DMatrix::from_row_slice(n, d, &xs);
    Ok((
        x,
        PredictiveSummary {
            mean: DVector::from_vec(mean),
            variance: DVector::from_vec(variance),
            lower: DVector::from_vec(lower),
            upper: DVector::from_vec(upper),
            level,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis_matrix, BasisSpec};
    use crate::correlation::{CorrelationFamily, RangeVector};
    use crate::design::latin_hypercube;
    use approx::assert_relative_eq;

    fn training_set(n: usize, seed: u64) -> (DesignMatrix, DVector<f64>, DMatrix<f64>) {
        let x = latin_hypercube(n, 2, seed);
        let y = DVector::from_fn(n, |i, _| {
            let (a, b) = (x.coord(i, 0), x.coord(i, 1));
            1.0 + (4.0 * a).sin() * (1.0 - b) + 0.8 * b
        });
        let spec = BasisSpec::new(2, 2, 2).unwrap();
        let f = build_basis_matrix(&x, &spec).unwrap().matrix().clone();
        (x, y, f)
    }

    #[test]
    fn interpolates_training_points() {
        let (x, y, f) = training_set(40, 12);
        let mut predictor =
            Predictor::new(&x, &y, &f, vec![CorrelationFamily::Bohman; 2], 0.0).unwrap();
        let tau = [0.35, 0.3];
        let moments = predictor
            .conditional_moments(&tau, x.matrix(), &f)
            .unwrap();
        let y_range = y.max() - y.min();
        let (_, terms) = crate::inference::integrated_loglik(
            &tau,
            &x,
            &y,
            &f,
            &[CorrelationFamily::Bohman, CorrelationFamily::Bohman],
            0.0,
        )
        .unwrap();
        for i in 0..x.n() {
            assert!(
                (moments.mean[i] - y[i]).abs() <= 1e-6 * y_range,
                "mean at training point {i}: {} vs {}",
                moments.mean[i],
                y[i]
            );
            assert!(
                moments.var[i] <= 1e-8 * terms.sigma2_hat,
                "variance at training point {i}: {}",
                moments.var[i]
            );
        }
    }

    #[test]
    fn decoupled_points_fall_back_to_regression() {
        let (x, y, f) = training_set(30, 7);
        let tau = [0.2, 0.25];
        let mut predictor =
            Predictor::new(&x, &y, &f, vec![CorrelationFamily::Bohman; 2], 0.0).unwrap();
        // a point displaced beyond the range of every training point in
        // dimension 0 (extrapolation past the cube is allowed)
        let x0 = DMatrix::from_row_slice(1, 2, &[1.5, 0.5]);
        let spec = BasisSpec::new(2, 2, 2).unwrap();
        let terms = crate::basis::enumerate_terms(&spec);
        let f0 = crate::basis::evaluate_terms(&x0, &terms, 2);
        let moments = predictor.conditional_moments(&tau, &x0, &f0).unwrap();
        let (_, lt) = crate::inference::integrated_loglik(
            &tau,
            &x,
            &y,
            &f,
            &[CorrelationFamily::Bohman, CorrelationFamily::Bohman],
            0.0,
        )
        .unwrap();
        let reg: f64 = (0..f0.ncols()).map(|c| f0[(0, c)] * lt.beta_hat[c]).sum();
        assert_relative_eq!(moments.mean[0], reg, max_relative = 1e-10);
        // with g = 0 the first two variance terms reduce to the prior one
        let n = 30.0;
        let q = f.ncols() as f64;
        let t_factor = (n - q) / (n - q - 2.0);
        assert!(moments.var[0] >= t_factor * lt.sigma2_hat * (1.0 - 1e-12));
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        let (x, y, f) = training_set(60, 3);
        let tau = [0.4, 0.5];
        let families = vec![CorrelationFamily::Bohman; 2];
        let model = ProductCorrelationModel::new(
            families.clone(),
            RangeVector::new(tau.to_vec()).unwrap(),
        )
        .unwrap();
        let x0 = latin_hypercube(15, 2, 99);
        let spec = BasisSpec::new(2, 2, 2).unwrap();
        let f0 = build_basis_matrix(&x0, &spec).unwrap().matrix().clone();

        let mut predictor = Predictor::new(&x, &y, &f, families, 0.0).unwrap();
        let sparse = predictor
            .conditional_moments(&tau, x0.matrix(), &f0)
            .unwrap();
        let dense =
            conditional_moments_dense(x.matrix(), &y, &f, &model, x0.matrix(), &f0, 0.0).unwrap();
        for j in 0..15 {
            assert_relative_eq!(sparse.mean[j], dense.mean[j], max_relative = 1e-9, epsilon = 1e-11);
            assert_relative_eq!(sparse.var[j], dense.var[j], max_relative = 1e-9, epsilon = 1e-11);
        }
    }

    #[test]
    fn translation_equivariance() {
        let (x, y, f) = training_set(35, 21);
        let tau = [0.4, 0.35];
        let families = vec![CorrelationFamily::Bohman; 2];
        let x0 = latin_hypercube(10, 2, 5);
        let spec = BasisSpec::new(2, 2, 2).unwrap();
        let f0 = build_basis_matrix(&x0, &spec).unwrap().matrix().clone();
        let mut p1 = Predictor::new(&x, &y, &f, families.clone(), 0.0).unwrap();
        let base = p1.conditional_moments(&tau, x0.matrix(), &f0).unwrap();
        let shifted_y = y.add_scalar(5.5);
        let mut p2 = Predictor::new(&x, &shifted_y, &f, families, 0.0).unwrap();
        let shifted = p2.conditional_moments(&tau, x0.matrix(), &f0).unwrap();
        for j in 0..10 {
            assert_relative_eq!(shifted.mean[j], base.mean[j] + 5.5, epsilon = 1e-10);
            assert_relative_eq!(shifted.var[j], base.var[j], epsilon = 1e-10);
        }
    }

    #[test]
    fn cross_correlation_structural_zeros_match_pair_test() {
        let (x, _, _) = training_set(50, 31);
        let tau = [0.15, 0.25];
        let model = ProductCorrelationModel::new(
            vec![CorrelationFamily::Bohman; 2],
            RangeVector::new(tau.to_vec()).unwrap(),
        )
        .unwrap();
        let x0 = latin_hypercube(20, 2, 77);
        let cross = build_cross_correlation(&x, x0.matrix(), &model).unwrap();
        for j in 0..20 {
            let stored: std::collections::HashMap<usize, f64> =
                cross.column(j).iter().cloned().collect();
            for i in 0..50 {
                let within = (0..2)
                    .all(|k| (x.coord(i, k) - x0.coord(j, k)).abs() < tau[k]);
                let expected = model.correlation(&x.point(i), &x0.point(j)).unwrap();
                match stored.get(&i) {
                    Some(&v) => {
                        assert!(within, "stored entry outside compact support");
                        assert_relative_eq!(v, expected, epsilon = 1e-15);
                    }
                    None => {
                        assert!(
                            !within || expected == 0.0,
                            "missing entry for interacting pair ({i},{j})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn aggregation_examples() {
        // identical moment sets: between-draw term vanishes
        let m = ConditionalMoments {
            mean: DVector::from_vec(vec![1.0, 2.0]),
            var: DVector::from_vec(vec![0.5, 0.25]),
        };
        let agg = aggregate_predictions(&[m.clone(), m.clone(), m.clone()]).unwrap();
        assert_eq!(agg.mean, DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(agg.variance, DVector::from_vec(vec![0.5, 0.25]));

        // K=2 hand computation: mean 1, variance 1 + 1 = 2
        let a = ConditionalMoments {
            mean: DVector::from_vec(vec![0.0]),
            var: DVector::from_vec(vec![1.0]),
        };
        let b = ConditionalMoments {
            mean: DVector::from_vec(vec![2.0]),
            var: DVector::from_vec(vec![1.0]),
        };
        let agg = aggregate_predictions(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(agg.mean[0], 1.0);
        assert_eq!(agg.variance[0], 2.0);

        // order invariance
        let swapped = aggregate_predictions(&[b, a]).unwrap();
        assert_eq!(agg.mean, swapped.mean);
        assert_eq!(agg.variance, swapped.variance);

        assert!(aggregate_predictions(&[]).is_err());
    }

    #[test]
    fn aggregate_variance_dominates_mean_component() {
        let draws: Vec<ConditionalMoments> = (0..6)
            .map(|i| ConditionalMoments {
                mean: DVector::from_vec(vec![i as f64 * 0.3, -0.1 * i as f64]),
                var: DVector::from_vec(vec![0.2 + 0.01 * i as f64, 0.4]),
            })
            .collect();
        let agg = aggregate_predictions(&draws).unwrap();
        let mean_v = {
            let mut acc = DVector::zeros(2);
            for d in &draws {
                acc += &d.var;
            }
            acc / draws.len() as f64
        };
        for j in 0..2 {
            assert!(agg.variance[j] >= mean_v[j] - 1e-15);
        }
    }

    #[test]
    fn credible_interval_examples() {
        let agg = PosteriorMoments {
            mean: DVector::from_vec(vec![0.0, 3.0]),
            variance: DVector::from_vec(vec![1.0, 0.0]),
        };
        let s = credible_interval(&agg, 0.95).unwrap();
        assert_relative_eq!(s.lower[0], -1.9599639845400536, epsilon = 1e-9);
        assert_relative_eq!(s.upper[0], 1.9599639845400536, epsilon = 1e-9);
        // degenerate variance gives a point interval
        assert_eq!(s.lower[1], 3.0);
        assert_eq!(s.upper[1], 3.0);
        // widening: the 99% interval strictly contains the 95% one
        let s99 = credible_interval(&agg, 0.99).unwrap();
        assert!(s99.lower[0] < s.lower[0] && s99.upper[0] > s.upper[0]);
        assert!(credible_interval(&agg, 1.0).is_err());
    }

    #[test]
    fn mixture_interval_close_to_gaussian_for_large_dof() {
        let moments = vec![
            ConditionalMoments {
                mean: DVector::from_vec(vec![0.2]),
                var: DVector::from_vec(vec![0.9]),
            },
            ConditionalMoments {
                mean: DVector::from_vec(vec![-0.2]),
                var: DVector::from_vec(vec![1.1]),
            },
        ];
        let gauss = credible_interval(&aggregate_predictions(&moments).unwrap(), 0.95).unwrap();
        let exact = credible_interval_mixture(&moments, 2000, 0.95).unwrap();
        assert_relative_eq!(gauss.lower[0], exact.lower[0], epsilon = 2e-2);
        assert_relative_eq!(gauss.upper[0], exact.upper[0], epsilon = 2e-2);
        // heavier tails for small dof widen the interval
        let heavy = credible_interval_mixture(&moments, 5, 0.95).unwrap();
        assert!(heavy.upper[0] > exact.upper[0]);
    }

    #[test]
    fn predictions_csv_round_trip() {
        let summary = PredictiveSummary {
            mean: DVector::from_vec(vec![1.0, 2.5]),
            variance: DVector::from_vec(vec![0.1, 0.2]),
            lower: DVector::from_vec(vec![0.5, 1.5]),
            upper: DVector::from_vec(vec![1.5, 3.5]),
            level: 0.9,
        };
        let x = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let mut buf = Vec::new();
        write_predictions_csv(&x, &summary, &mut buf).unwrap();
        let (x_back, s_back) = read_predictions_csv(buf.as_slice()).unwrap();
        assert_eq!(x, x_back);
        assert_eq!(summary.mean, s_back.mean);
        assert_eq!(summary.level, s_back.level);
    }
}
