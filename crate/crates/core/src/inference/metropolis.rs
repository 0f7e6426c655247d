//! Adaptive random-walk Metropolis with log-adaptive proposal scaling.
//!
//! Proposals are multivariate normal around the current state. Candidates
//! outside the prior support are rejected immediately (and counted as
//! rejections, so the adaptation sees the truncation). After every block of
//! iterations the proposal covariance is reset to the empirical covariance
//! of the chain so far times a scale factor, and the log of the scale moves
//! toward the target acceptance rate with a vanishing step `k^-gamma`
//! (square-summable but not summable, preserving ergodicity).

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::prior::ParamSupport;
use crate::{Error, Result};

/// A log target density known up to an additive constant.
pub trait LogTarget {
    fn log_density(&mut self, params: &[f64]) -> Result<f64>;
}

impl<F> LogTarget for F
where
    F: FnMut(&[f64]) -> f64,
{
    fn log_density(&mut self, params: &[f64]) -> Result<f64> {
        Ok(self(params))
    }
}

/// Sampler configuration.
#[derive(Debug, Clone)]
pub struct McmcConfig {
    /// Total iterations `B`.
    pub iterations: usize,
    /// Iterations discarded before retention.
    pub burn_in: usize,
    /// Thinning stride used when prediction consumes the chain.
    pub stride: usize,
    /// Starting state; must lie inside the support.
    pub initial: Vec<f64>,
    /// Target acceptance rate of the scale adaptation.
    pub target_acceptance: f64,
    /// Adaptation block length; 0 disables adaptation entirely.
    pub block_length: usize,
    /// Adaptation decay exponent: step `k^-decay` after block `k`.
    pub decay_exponent: f64,
    /// Initial per-coordinate proposal standard deviation.
    pub initial_step: f64,
    /// RNG seed.
    pub seed: u64,
}

impl McmcConfig {
    /// Defaults for sampling ranges under a simplex prior with cutoff `C`:
    /// start at `C/(2d)`, initial proposal sd `0.1 C/d`, target acceptance
    /// 0.234, blocks of 50, decay exponent 0.6, stride 10.
    pub fn for_simplex(prior: &super::SimplexPrior, iterations: usize, burn_in: usize, seed: u64) -> Self {
        let d = prior.dim() as f64;
        McmcConfig {
            iterations,
            burn_in,
            stride: 10,
            initial: prior.default_initial(),
            target_acceptance: 0.234,
            block_length: 50,
            decay_exponent: 0.6,
            initial_step: 0.1 * prior.cutoff() / d,
            seed,
        }
    }

    /// Defaults for a box support: start at the center with a proposal sd
    /// of a tenth of the mean width per dimension.
    pub fn for_box(prior: &super::BoxPrior, iterations: usize, burn_in: usize, seed: u64) -> Self {
        let d = prior.dim() as f64;
        McmcConfig {
            iterations,
            burn_in,
            stride: 10,
            initial: prior.center(),
            target_acceptance: 0.234,
            block_length: 50,
            decay_exponent: 0.6,
            initial_step: 0.1 * prior.mean_width() / d,
            seed,
        }
    }

    fn validate<S: ParamSupport>(&self, support: &S) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidArgument(format!(
                "burn-in {} must be below the iteration count {}",
                self.burn_in, self.iterations
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument("stride must be >= 1".into()));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::InvalidArgument("initial step must be positive".into()));
        }
        if !(0.0 < self.target_acceptance && self.target_acceptance < 1.0) {
            return Err(Error::InvalidArgument(
                "target acceptance must lie in (0, 1)".into(),
            ));
        }
        if self.initial.len() != support.dim() {
            return Err(Error::DimensionMismatch(format!(
                "initial point has dimension {}, support has {}",
                self.initial.len(),
                support.dim()
            )));
        }
        if !support.contains(&self.initial) {
            return Err(Error::InitialOutsideSupport(self.initial.clone()));
        }
        Ok(())
    }
}

/// Posterior samples with acceptance diagnostics.
#[derive(Debug, Clone)]
pub struct Chain {
    /// State after each iteration, `1..=B`.
    pub states: Vec<Vec<f64>>,
    /// Log target density of each state.
    pub logliks: Vec<f64>,
    /// Whether the proposal at each iteration was accepted.
    pub accepted: Vec<bool>,
    /// Acceptance rate of each adaptation block.
    pub block_rates: Vec<f64>,
    /// Proposal covariance after each adaptation, keyed by iteration.
    pub proposal_history: Vec<(usize, DMatrix<f64>)>,
    /// Proposals rejected because the factorization broke down.
    pub numeric_rejections: usize,
    pub burn_in: usize,
    pub stride: usize,
}

impl Chain {
    pub fn d(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Post-burn-in draws.
    pub fn retained(&self) -> &[Vec<f64>] {
        &self.states[self.burn_in..]
    }

    /// Every `stride`-th retained draw (prediction subset).
    pub fn thinned(&self) -> Vec<&[f64]> {
        self.retained()
            .iter()
            .step_by(self.stride)
            .map(Vec::as_slice)
            .collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|&&a| a).count() as f64 / self.accepted.len() as f64
    }

    /// CSV with columns `iter, tau_1..tau_d, loglik, accepted`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["iter".to_string()];
        header.extend((1..=self.d()).map(|k| format!("tau_{k}")));
        header.push("loglik".into());
        header.push("accepted".into());
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![(i + 1).to_string()];
            rec.extend(self.states[i].iter().map(|v| v.to_string()));
            rec.push(self.logliks[i].to_string());
            rec.push(if self.accepted[i] { "1" } else { "0" }.to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a chain written by [`Chain::write_csv`]; burn-in and stride
    /// must be re-supplied by the caller's configuration.
    pub fn read_csv<R: std::io::Read>(r: R, burn_in: usize, stride: usize) -> Result<Chain> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(r);
        let headers = rdr.headers()?.clone();
        let d = headers.iter().filter(|h| h.starts_with("tau_")).count();
        if d == 0 || !headers.iter().any(|h| h == "loglik") {
            return Err(Error::Schema("not a chain csv".into()));
        }
        let mut states = Vec::new();
        let mut logliks = Vec::new();
        let mut accepted = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let mut tau = Vec::with_capacity(d);
            for k in 0..d {
                tau.push(rec[k + 1].parse::<f64>().map_err(|_| {
                    Error::Schema(format!("bad chain value `{}`", &rec[k + 1]))
                })?);
            }
            states.push(tau);
            logliks.push(rec[d + 1]
                .parse::<f64>()
                .map_err(|_| Error::Schema("bad loglik value".into()))?);
            accepted.push(&rec[d + 2] == "1");
        }
        if burn_in >= states.len() {
            return Err(Error::InvalidArgument(
                "burn-in is not below the chain length".into(),
            ));
        }
        Ok(Chain {
            states,
            logliks,
            accepted,
            block_rates: Vec::new(),
            proposal_history: Vec::new(),
            numeric_rejections: 0,
            burn_in,
            stride,
        })
    }
}

/// Runs the adaptive Metropolis sampler.
///
/// Numeric factorization failures on a candidate reject that proposal (the
/// event is counted and logged); any other evaluation error aborts with the
/// iteration and state attached.
pub fn metropolis_run<T: LogTarget, S: ParamSupport>(
    config: &McmcConfig,
    target: &mut T,
    support: &S,
) -> Result<Chain> {
    config.validate(support)?;
    let d = config.initial.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut current = config.initial.clone();
    let mut current_ll = target
        .log_density(&current)
        .map_err(|e| Error::SamplerAborted {
            iteration: 0,
            tau: current.clone(),
            source: Box::new(e),
        })?;

    let mut prop_chol = DMatrix::identity(d, d) * config.initial_step;
    let mut log_scale = (2.38f64.powi(2) / d as f64).ln();

    // running moments over all visited states, including the start
    let mut count = 1.0f64;
    let mut mean = DVector::from_column_slice(&current);
    let mut sum_sq = &mean * mean.transpose();

    let mut chain = Chain {
        states: Vec::with_capacity(config.iterations),
        logliks: Vec::with_capacity(config.iterations),
        accepted: Vec::with_capacity(config.iterations),
        block_rates: Vec::new(),
        proposal_history: Vec::new(),
        numeric_rejections: 0,
        burn_in: config.burn_in,
        stride: config.stride,
    };

    let mut block_accepts = 0usize;
    let mut cand = vec![0.0f64; d];

    for iter in 1..=config.iterations {
        // propose around the current state
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let step = &prop_chol * z;
        for k in 0..d {
            cand[k] = current[k] + step[k];
        }

        let mut accept = false;
        if support.contains(&cand) {
            match target.log_density(&cand) {
                Ok(cand_ll) => {
                    let delta = cand_ll - current_ll;
                    if delta >= 0.0 || rng.random::<f64>() < delta.exp() {
                        accept = true;
                        current.copy_from_slice(&cand);
                        current_ll = cand_ll;
                    }
                }
                Err(Error::NotPositiveDefinite { pivot, value }) => {
                    log::warn!(
                        "iteration {iter}: proposal rejected, factorization broke down \
                         (pivot {pivot}, value {value:.3e})"
                    );
                    chain.numeric_rejections += 1;
                }
                Err(e) => {
                    return Err(Error::SamplerAborted {
                        iteration: iter,
                        tau: cand.clone(),
                        source: Box::new(e),
                    });
                }
            }
        }
        if accept {
            block_accepts += 1;
        }
        chain.states.push(current.clone());
        chain.logliks.push(current_ll);
        chain.accepted.push(accept);

        // running mean and raw second moment
        count += 1.0;
        let xv = DVector::from_column_slice(&current);
        mean += (&xv - &mean) / count;
        sum_sq += &xv * xv.transpose();

        if config.block_length > 0 && iter % config.block_length == 0 {
            let k = iter / config.block_length;
            let rate = block_accepts as f64 / config.block_length as f64;
            chain.block_rates.push(rate);
            block_accepts = 0;
            let gamma = (k as f64).powf(-config.decay_exponent);
            log_scale += gamma * (rate - config.target_acceptance);

            let mut cov = &sum_sq / count - &mean * mean.transpose();
            for i in 0..d {
                cov[(i, i)] += 1e-10;
            }
            let sigma = cov * log_scale.exp();
            if let Some(chol) = Cholesky::new(sigma.clone()) {
                prop_chol = chol.l();
                chain.proposal_history.push((iter, sigma));
            }
        }
    }

    Ok(chain)
}
