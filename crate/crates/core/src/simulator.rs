//! Synthetic Gaussian-process realizations and the simulation-study harness
//! comparing the sparse compactly supported model against the dense
//! power-exponential model that generated the data.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::basis::{build_basis_matrix, enumerate_terms, evaluate_terms, BasisSpec};
use crate::correlation::{effective_range_to_phi, CorrelationFamily, ProductCorrelationModel};
use crate::dense::DenseCholesky;
use crate::design::{latin_hypercube, DesignMatrix};
use crate::eval::{empirical_coverage, mean_sd, nse};
use crate::inference::{
    calibrate_cutoff, metropolis_run, BoxPrior, DenseGpLikelihood, McmcConfig, SimplexPrior,
    SparseGpLikelihood,
};
use crate::predict::{
    aggregate_predictions, conditional_moments_dense, credible_interval, Predictor,
};
use crate::{Error, Result};

/// Mean function of a synthetic Gaussian process.
#[derive(Debug, Clone)]
pub enum MeanSpec {
    Constant(f64),
    Basis { spec: BasisSpec, beta: DVector<f64> },
}

impl MeanSpec {
    fn evaluate(&self, points: &DMatrix<f64>) -> Result<DVector<f64>> {
        match self {
            MeanSpec::Constant(c) => Ok(DVector::from_element(points.nrows(), *c)),
            MeanSpec::Basis { spec, beta } => {
                let terms = enumerate_terms(spec);
                if terms.len() != beta.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} basis terms but {} coefficients",
                        terms.len(),
                        beta.len()
                    )));
                }
                Ok(evaluate_terms(points, &terms, spec.p) * beta)
            }
        }
    }
}

/// Covariance family, marginal variance, and mean of a synthetic GP.
#[derive(Debug, Clone)]
pub struct GpSpec {
    pub model: ProductCorrelationModel,
    pub sigma2: f64,
    pub mean: MeanSpec,
}

/// Draws one realization `Y = mean + L z` over the given points, where
/// `L L' = sigma2 R` is a dense Cholesky factor and `z` is standard normal.
pub fn sample_gp(points: &DMatrix<f64>, spec: &GpSpec, seed: u64) -> Result<DVector<f64>> {
    if !(spec.sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "marginal variance must be positive, got {}",
            spec.sigma2
        )));
    }
    let mean = spec.mean.evaluate(points)?;
    let mut cov = crate::dense::build_dense_correlation(points, &spec.model)?;
    cov *= spec.sigma2;
    let chol = DenseCholesky::new(cov)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(points.nrows(), 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let l = chol.l();
    Ok(mean + DVector::from_column_slice((l * z).as_slice()))
}

/// Simulation-study configuration (grids follow the comparison study; the
/// desk-scale defaults cap the sample size and replicate count so a full
/// sweep stays tractable).
#[derive(Debug, Clone)]
pub struct SimStudyConfig {
    pub dims: Vec<usize>,
    pub alphas: Vec<f64>,
    pub effective_ranges: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub sparsity_targets: Vec<f64>,
    pub n_eval: usize,
    pub level: f64,
    pub mcmc_iterations: usize,
    pub mcmc_burn_in: usize,
    pub mcmc_stride: usize,
    pub basis_p: usize,
    pub basis_m: usize,
    /// Truncated-power smoothness used by the sparse fit.
    pub sparse_alpha: f64,
    /// Effective-range bounds defining the uniform hyper-cube prior on the
    /// dense model's rates.
    pub dense_range_bounds: (f64, f64),
    pub base_seed: u64,
    pub jitter: f64,
}

impl SimStudyConfig {
    /// Desk-scale defaults: 20 replicates, sample sizes capped at 650.
    pub fn desk() -> Self {
        SimStudyConfig {
            dims: vec![2, 4],
            alphas: vec![1.5, 1.99],
            effective_ranges: vec![0.5, 2.0],
            sample_sizes: vec![100, 150, 250, 400, 650],
            replicates: 20,
            sparsity_targets: vec![0.02, 0.05],
            n_eval: 512,
            level: 0.95,
            mcmc_iterations: 500,
            mcmc_burn_in: 100,
            mcmc_stride: 10,
            basis_p: 5,
            basis_m: 2,
            sparse_alpha: 1.5,
            dense_range_bounds: (0.05, 5.0),
            base_seed: 2024,
            jitter: 0.0,
        }
    }

    /// The full grid (adds n = 1,100 and 100 replicates).
    pub fn full() -> Self {
        let mut c = Self::desk();
        c.sample_sizes.push(1100);
        c.replicates = 100;
        c
    }

    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicate count must be >= 1".into()));
        }
        for &v in self
            .alphas
            .iter()
            .chain(&self.effective_ranges)
            .chain(&self.sparsity_targets)
        {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "grid values must be positive, got {v}"
                )));
            }
        }
        if self.dims.is_empty() || self.sample_sizes.is_empty() {
            return Err(Error::EmptyInput("simulation grids".into()));
        }
        Ok(())
    }
}

/// One scored fit.
#[derive(Debug, Clone)]
pub struct SimRow {
    pub d: usize,
    pub alpha: f64,
    pub effective_range: f64,
    pub method: &'static str,
    /// Sparsity target for the sparse method, 0 for the dense baseline.
    pub sparsity: f64,
    pub n: usize,
    pub replicate: usize,
    pub nse: f64,
    pub coverage: f64,
}

/// Averages with Monte Carlo standard errors across replicates.
#[derive(Debug, Clone)]
pub struct SimSummaryRow {
    pub d: usize,
    pub alpha: f64,
    pub effective_range: f64,
    pub method: &'static str,
    pub sparsity: f64,
    pub n: usize,
    pub replicates: usize,
    pub mean_nse: f64,
    pub se_nse: f64,
    pub mean_coverage: f64,
    pub se_coverage: f64,
}

/// Study output: per-fit rows, aggregates, and recorded failures.
#[derive(Debug, Clone, Default)]
pub struct SimStudyResults {
    pub rows: Vec<SimRow>,
    pub summary: Vec<SimSummaryRow>,
    pub failures: Vec<String>,
}

impl SimStudyResults {
    /// One CSV per condition (`method, sparsity, n, replicate, nse,
    /// coverage`); returns the written paths.
    pub fn write_condition_csvs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut conditions: Vec<(usize, f64, f64)> = self
            .rows
            .iter()
            .map(|r| (r.d, r.alpha, r.effective_range))
            .collect();
        conditions.sort_by(|a, b| a.partial_cmp(b).unwrap());
        conditions.dedup();
        let mut paths = Vec::new();
        for (d, alpha, range) in conditions {
            let name = format!(
                "study_d{d}_a{}_r{}.csv",
                fmt_token(alpha),
                fmt_token(range)
            );
            let path = dir.join(name);
            let mut wtr = csv::Writer::from_writer(std::fs::File::create(&path)?);
            wtr.write_record(["method", "sparsity", "n", "replicate", "nse", "coverage"])?;
            for r in self.rows.iter().filter(|r| {
                r.d == d && r.alpha == alpha && r.effective_range == range
            }) {
                wtr.write_record([
                    r.method.to_string(),
                    r.sparsity.to_string(),
                    r.n.to_string(),
                    r.replicate.to_string(),
                    r.nse.to_string(),
                    r.coverage.to_string(),
                ])?;
            }
            wtr.flush()?;
            paths.push(path);
        }
        Ok(paths)
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "d",
            "alpha",
            "effective_range",
            "method",
            "sparsity",
            "n",
            "replicates",
            "mean_nse",
            "se_nse",
            "mean_coverage",
            "se_coverage",
        ])?;
        for s in &self.summary {
            wtr.write_record([
                s.d.to_string(),
                s.alpha.to_string(),
                s.effective_range.to_string(),
                s.method.to_string(),
                s.sparsity.to_string(),
                s.n.to_string(),
                s.replicates.to_string(),
                s.mean_nse.to_string(),
                s.se_nse.to_string(),
                s.mean_coverage.to_string(),
                s.se_coverage.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn fmt_token(v: f64) -> String {
    v.to_string().replace('.', "p")
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut s = splitmix64(base);
    for &p in parts {
        s = splitmix64(s ^ p);
    }
    s
}

struct Job {
    cond_idx: usize,
    d: usize,
    alpha: f64,
    range: f64,
    n: usize,
    replicate: usize,
}

/// Runs the simulation study: per replicate, draw a GP realization over a
/// training LHS and an evaluation LHS jointly, fit the data-generating
/// dense model (rates sampled, smoothness fixed at truth) and the sparse
/// compact model, and score both by NSE and pointwise coverage. Failures
/// are recorded and skipped, never silently dropped.
pub fn run_sim_study(config: &SimStudyConfig) -> Result<SimStudyResults> {
    config.validate()?;
    let mut jobs = Vec::new();
    let mut cond_idx = 0usize;
    for &d in &config.dims {
        for &alpha in &config.alphas {
            for &range in &config.effective_ranges {
                for &n in &config.sample_sizes {
                    for replicate in 0..config.replicates {
                        jobs.push(Job {
                            cond_idx,
                            d,
                            alpha,
                            range,
                            n,
                            replicate,
                        });
                    }
                }
                cond_idx += 1;
            }
        }
    }

    let outcomes: Vec<std::result::Result<Vec<SimRow>, String>> = jobs
        .par_iter()
        .map(|job| {
            run_replicate(config, job).map_err(|e| {
                format!(
                    "d={} alpha={} range={} n={} replicate={}: {e}",
                    job.d, job.alpha, job.range, job.n, job.replicate
                )
            })
        })
        .collect();

    let mut results = SimStudyResults::default();
    for outcome in outcomes {
        match outcome {
            Ok(rows) => results.rows.extend(rows),
            Err(msg) => results.failures.push(msg),
        }
    }
    results.summary = summarize(&results.rows);
    Ok(results)
}

fn run_replicate(config: &SimStudyConfig, job: &Job) -> Result<Vec<SimRow>> {
    let Job {
        cond_idx,
        d,
        alpha,
        range,
        n,
        replicate,
    } = *job;
    let seed_of = |salt: u64| {
        derive_seed(
            config.base_seed,
            &[cond_idx as u64, n as u64, replicate as u64, salt],
        )
    };

    let train = latin_hypercube(n, d, seed_of(1));
    let eval_design = latin_hypercube(config.n_eval, d, seed_of(2));
    let joint = train.vstack(&eval_design)?;

    let phi_true = effective_range_to_phi(range, alpha);
    let gen_model =
        ProductCorrelationModel::power_exponential(&vec![alpha; d], &vec![phi_true; d])?;
    let y_joint = sample_gp(
        joint.matrix(),
        &GpSpec {
            model: gen_model,
            sigma2: 1.0,
            mean: MeanSpec::Constant(0.0),
        },
        seed_of(3),
    )?;
    let y_train = DVector::from_column_slice(&y_joint.as_slice()[..n]);
    let y_eval = DVector::from_column_slice(&y_joint.as_slice()[n..]);

    let mut rows = Vec::new();

    // dense: the data-generating family with the smoothness fixed at truth
    {
        let ones = DMatrix::from_element(n, 1, 1.0);
        let ones0 = DMatrix::from_element(config.n_eval, 1, 1.0);
        let (r_lo, r_hi) = config.dense_range_bounds;
        let phi_bounds = (
            effective_range_to_phi(r_hi, alpha),
            effective_range_to_phi(r_lo, alpha),
        );
        let prior = BoxPrior::new(vec![phi_bounds; d])?;
        let mut target =
            DenseGpLikelihood::new(train.matrix(), &y_train, &ones, vec![alpha; d], config.jitter)?;
        let mut mcmc = McmcConfig::for_box(
            &prior,
            config.mcmc_iterations,
            config.mcmc_burn_in,
            seed_of(4),
        );
        mcmc.stride = config.mcmc_stride;
        let chain = metropolis_run(&mcmc, &mut target, &prior)?;
        let mut draws = Vec::new();
        for phi in chain.thinned() {
            let model =
                ProductCorrelationModel::power_exponential(&vec![alpha; d], phi)?;
            draws.push(conditional_moments_dense(
                train.matrix(),
                &y_train,
                &ones,
                &model,
                eval_design.matrix(),
                &ones0,
                config.jitter,
            )?);
        }
        let summary = credible_interval(&aggregate_predictions(&draws)?, config.level)?;
        rows.push(SimRow {
            d,
            alpha,
            effective_range: range,
            method: "dense",
            sparsity: 0.0,
            n,
            replicate,
            nse: nse(summary.mean.as_slice(), y_eval.as_slice())?,
            coverage: empirical_coverage(
                summary.lower.as_slice(),
                summary.upper.as_slice(),
                y_eval.as_slice(),
            )?,
        });
    }

    // sparse: compactly supported model with the polynomial mean
    let spec = BasisSpec::new(config.basis_p, config.basis_m.min(d), d)?;
    let fb = build_basis_matrix(&train, &spec)?;
    let f = fb.matrix().clone();
    let f0 = evaluate_terms(eval_design.matrix(), fb.terms(), spec.p);
    let families =
        vec![CorrelationFamily::truncated_power(config.sparse_alpha, None)?; d];
    for (ti, &target_sparsity) in config.sparsity_targets.iter().enumerate() {
        let report = calibrate_cutoff(&train, target_sparsity, seed_of(10 + ti as u64))?;
        let prior = SimplexPrior::new(report.c, d)?;
        let mut likelihood =
            SparseGpLikelihood::new(&train, &y_train, &f, families.clone(), config.jitter)?;
        let mut mcmc = McmcConfig::for_simplex(
            &prior,
            config.mcmc_iterations,
            config.mcmc_burn_in,
            seed_of(20 + ti as u64),
        );
        mcmc.stride = config.mcmc_stride;
        let chain = metropolis_run(&mcmc, &mut likelihood, &prior)?;
        let mut predictor =
            Predictor::new(&train, &y_train, &f, families.clone(), config.jitter)?;
        let mut draws = Vec::new();
        for tau in chain.thinned() {
            draws.push(predictor.conditional_moments(tau, eval_design.matrix(), &f0)?);
        }
        let summary = credible_interval(&aggregate_predictions(&draws)?, config.level)?;
        rows.push(SimRow {
            d,
            alpha,
            effective_range: range,
            method: "sparse",
            sparsity: target_sparsity,
            n,
            replicate,
            nse: nse(summary.mean.as_slice(), y_eval.as_slice())?,
            coverage: empirical_coverage(
                summary.lower.as_slice(),
                summary.upper.as_slice(),
                y_eval.as_slice(),
            )?,
        });
    }

    Ok(rows)
}

fn summarize(rows: &[SimRow]) -> Vec<SimSummaryRow> {
    let mut keys: Vec<(usize, u64, u64, &'static str, u64, usize)> = rows
        .iter()
        .map(|r| {
            (
                r.d,
                r.alpha.to_bits(),
                r.effective_range.to_bits(),
                r.method,
                r.sparsity.to_bits(),
                r.n,
            )
        })
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.iter()
        .map(|&(d, alpha_bits, range_bits, method, sparsity_bits, n)| {
            let group: Vec<&SimRow> = rows
                .iter()
                .filter(|r| {
                    r.d == d
                        && r.alpha.to_bits() == alpha_bits
                        && r.effective_range.to_bits() == range_bits
                        && r.method == method
                        && r.sparsity.to_bits() == sparsity_bits
                        && r.n == n
                })
                .collect();
            let nses: Vec<f64> = group.iter().map(|r| r.nse).collect();
            let covs: Vec<f64> = group.iter().map(|r| r.coverage).collect();
            let (mean_nse, sd_nse) = mean_sd(&nses);
            let (mean_coverage, sd_cov) = mean_sd(&covs);
            let k = group.len() as f64;
            SimSummaryRow {
                d,
                alpha: f64::from_bits(alpha_bits),
                effective_range: f64::from_bits(range_bits),
                method,
                sparsity: f64::from_bits(sparsity_bits),
                n,
                replicates: group.len(),
                mean_nse,
                se_nse: sd_nse / k.sqrt(),
                mean_coverage,
                se_coverage: sd_cov / k.sqrt(),
            }
        })
        .collect()
}
