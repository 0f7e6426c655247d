//! Scoring metrics (Nash-Sutcliffe efficiency, empirical coverage) and the
//! per-step timing benchmark comparing the sparse and dense pipelines.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::correlation::{CorrelationFamily, ProductCorrelationModel, RangeVector};
use crate::dense;
use crate::design::DesignMatrix;
use crate::sparsecov::{
    assemble_sparse_correlation, find_interacting_pairs, SymbolicFactor,
};
use crate::{Error, Result};

/// Nash-Sutcliffe efficiency: `1 - sum((pred-actual)^2) / sum((actual-mean)^2)`.
///
/// 1 is a perfect fit; 0 matches the mean predictor. Errors when the actual
/// values are constant (undefined denominator).
pub fn nse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(Error::DimensionMismatch(format!(
            "nse: {} predictions vs {} actuals",
            pred.len(),
            actual.len()
        )));
    }
    if actual.len() < 2 {
        return Err(Error::InvalidArgument(
            "nse needs at least 2 observations".into(),
        ));
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let denom: f64 = actual.iter().map(|&a| (a - mean).powi(2)).sum();
    if denom == 0.0 {
        return Err(Error::ConstantResponse);
    }
    let num: f64 = pred
        .iter()
        .zip(actual)
        .map(|(&p, &a)| (p - a).powi(2))
        .sum();
    Ok(1.0 - num / denom)
}

/// Fraction of actual values falling inside the closed intervals
/// `[lower_i, upper_i]`.
pub fn empirical_coverage(lower: &[f64], upper: &[f64], actual: &[f64]) -> Result<f64> {
    if lower.len() != upper.len() || lower.len() != actual.len() {
        return Err(Error::DimensionMismatch(
            "coverage: interval and actual lengths differ".into(),
        ));
    }
    if actual.is_empty() {
        return Err(Error::EmptyInput("coverage intervals".into()));
    }
    for (lo, hi) in lower.iter().zip(upper) {
        if lo > hi {
            return Err(Error::InvalidArgument(format!(
                "interval lower {lo} exceeds upper {hi}"
            )));
        }
    }
    let covered = actual
        .iter()
        .zip(lower.iter().zip(upper))
        .filter(|(a, (lo, hi))| *lo <= **a && **a <= **hi)
        .count();
    Ok(covered as f64 / actual.len() as f64)
}

/// One timed measurement of a pipeline step.
#[derive(Debug, Clone)]
pub struct TimingSample {
    pub path: &'static str,
    pub step: &'static str,
    pub n: usize,
    pub sparsity: f64,
    pub repeat: usize,
    pub seconds: f64,
}

/// Wall-clock measurements for every (step, n, sparsity) cell, with notices
/// for skipped dense baselines.
#[derive(Debug, Clone, Default)]
pub struct TimingReport {
    pub samples: Vec<TimingSample>,
    pub notices: Vec<String>,
}

impl TimingReport {
    fn times(&self, path: &str, step: &str, n: usize, sparsity: f64) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| s.path == path && s.step == step && s.n == n && s.sparsity == sparsity)
            .map(|s| s.seconds)
            .collect()
    }

    pub fn median(&self, path: &str, step: &str, n: usize, sparsity: f64) -> Option<f64> {
        let mut t = self.times(path, step, n, sparsity);
        if t.is_empty() {
            return None;
        }
        t.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(t[t.len() / 2])
    }

    pub fn mean(&self, path: &str, step: &str, n: usize, sparsity: f64) -> Option<f64> {
        let t = self.times(path, step, n, sparsity);
        if t.is_empty() {
            return None;
        }
        Some(t.iter().sum::<f64>() / t.len() as f64)
    }

    /// CSV with columns `path, step, n, sparsity, repeat, seconds`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["path", "step", "n", "sparsity", "repeat", "seconds"])?;
        for s in &self.samples {
            wtr.write_record([
                s.path.to_string(),
                s.step.to_string(),
                s.n.to_string(),
                s.sparsity.to_string(),
                s.repeat.to_string(),
                s.seconds.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Timing benchmark configuration.
#[derive(Debug, Clone)]
pub struct TimingConfig {
    pub n_grid: Vec<usize>,
    pub sparsity_grid: Vec<f64>,
    pub d: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Dense baseline is skipped (with a notice) above this size.
    pub dense_cap: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            n_grid: vec![500, 1000, 2000, 4000],
            sparsity_grid: vec![0.02, 0.05],
            d: 4,
            repeats: 3,
            seed: 1,
            dense_cap: 6000,
        }
    }
}

/// Uniformly sampled reference design on the unit cube (not an LHS).
pub fn uniform_design(n: usize, d: usize, seed: u64) -> DesignMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>());
    DesignMatrix::new(m).expect("uniform draws lie in [0,1)")
}

/// Finds an isotropic range whose structural nonzero proportion is within
/// +-10% of `target` (or as close as the design permits).
pub fn calibrate_isotropic_tau(x: &DesignMatrix, target: f64) -> Result<RangeVector> {
    let n = x.n();
    let total = (n * (n - 1) / 2) as f64;
    let prop = |tau: f64| -> f64 {
        let rv = RangeVector::new(vec![tau; x.d()]).unwrap();
        find_interacting_pairs(x, &rv).len() as f64 / total
    };
    let (mut lo, mut hi) = (1e-6, 1.0);
    let mut tau = 0.5;
    for _ in 0..60 {
        tau = 0.5 * (lo + hi);
        let p = prop(tau);
        if (p - target).abs() <= 0.1 * target {
            break;
        }
        if p > target {
            hi = tau;
        } else {
            lo = tau;
        }
    }
    RangeVector::new(vec![tau; x.d()])
}

/// Times the four sparse-path steps and the dense baseline for each
/// `(n, sparsity)` cell. Timed regions run single-threaded; do not schedule
/// cells concurrently.
pub fn timing_benchmark(config: &TimingConfig) -> Result<TimingReport> {
    if config.n_grid.is_empty() || config.sparsity_grid.is_empty() {
        return Err(Error::EmptyInput("timing grids".into()));
    }
    let mut report = TimingReport::default();
    for &n in &config.n_grid {
        let x = uniform_design(n, config.d, config.seed);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
        let y = DMatrix::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));

        for &target in &config.sparsity_grid {
            let tau = calibrate_isotropic_tau(&x, target)?;
            let model = ProductCorrelationModel::isotropic_family(
                CorrelationFamily::Bohman,
                tau.clone(),
            )?;
            for repeat in 0..config.repeats {
                let t0 = Instant::now();
                let pairs = find_interacting_pairs(&x, &tau);
                report.samples.push(TimingSample {
                    path: "sparse",
                    step: "checking distances",
                    n,
                    sparsity: target,
                    repeat,
                    seconds: t0.elapsed().as_secs_f64(),
                });

                let t0 = Instant::now();
                let matrix = assemble_sparse_correlation(&x, &model, &pairs)?;
                report.samples.push(TimingSample {
                    path: "sparse",
                    step: "building matrix",
                    n,
                    sparsity: target,
                    repeat,
                    seconds: t0.elapsed().as_secs_f64(),
                });

                let t0 = Instant::now();
                let symbolic = SymbolicFactor::analyze(&matrix);
                let factor = symbolic.factorize(&matrix, 0.0)?;
                report.samples.push(TimingSample {
                    path: "sparse",
                    step: "cholesky",
                    n,
                    sparsity: target,
                    repeat,
                    seconds: t0.elapsed().as_secs_f64(),
                });

                let t0 = Instant::now();
                let w = factor.solve_transposed(&y);
                report.samples.push(TimingSample {
                    path: "sparse",
                    step: "backsolve",
                    n,
                    sparsity: target,
                    repeat,
                    seconds: t0.elapsed().as_secs_f64(),
                });
                std::hint::black_box(&w);
            }
        }

        if n > config.dense_cap {
            report.notices.push(format!(
                "dense baseline skipped at n={n}: exceeds cap {}",
                config.dense_cap
            ));
            continue;
        }
        let phis = vec![5.0; config.d];
        let alphas = vec![1.5; config.d];
        let dense_model = ProductCorrelationModel::power_exponential(&alphas, &phis)?;
        for repeat in 0..config.repeats {
            let t0 = Instant::now();
            let full = dense::build_dense_correlation(x.matrix(), &dense_model)?;
            report.samples.push(TimingSample {
                path: "dense",
                step: "building matrix",
                n,
                sparsity: 0.0,
                repeat,
                seconds: t0.elapsed().as_secs_f64(),
            });

            let t0 = Instant::now();
            let chol = dense::DenseCholesky::new(full)?;
            report.samples.push(TimingSample {
                path: "dense",
                step: "cholesky",
                n,
                sparsity: 0.0,
                repeat,
                seconds: t0.elapsed().as_secs_f64(),
            });

            let t0 = Instant::now();
            let w = chol.whiten(&y);
            report.samples.push(TimingSample {
                path: "dense",
                step: "backsolve",
                n,
                sparsity: 0.0,
                repeat,
                seconds: t0.elapsed().as_secs_f64(),
            });
            std::hint::black_box(&w);
        }
    }
    Ok(report)
}

/// Mean and population standard deviation of a slice.
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean vector of equal-length columns.
pub(crate) fn column_mean(rows: &[DVector<f64>]) -> DVector<f64> {
    let mut acc = DVector::zeros(rows[0].len());
    for r in rows {
        acc += r;
    }
    acc / rows.len() as f64
}
