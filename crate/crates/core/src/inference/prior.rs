//! Prior supports for the range and rate parameters.

use crate::{Error, Result};

/// A region of parameter space proposals must stay inside.
pub trait ParamSupport {
    fn dim(&self) -> usize;
    fn contains(&self, params: &[f64]) -> bool;
}

/// The simplex support: `tau_k > 0` for all `k` and `sum(tau) <= C`
/// (closed upper boundary). The prior is uniform over this set, letting the
/// per-dimension ranges trade off against one another while capping the
/// number of structural nonzeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPrior {
    c: f64,
    d: usize,
}

impl SimplexPrior {
    pub fn new(c: f64, d: usize) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "simplex cutoff must be positive, got {c}"
            )));
        }
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        Ok(SimplexPrior { c, d })
    }

    pub fn cutoff(&self) -> f64 {
        self.c
    }

    /// Barycenter-halfway default start for the sampler.
    pub fn default_initial(&self) -> Vec<f64> {
        vec![self.c / (2.0 * self.d as f64); self.d]
    }
}

impl ParamSupport for SimplexPrior {
    fn dim(&self) -> usize {
        self.d
    }

    fn contains(&self, params: &[f64]) -> bool {
        params.len() == self.d
            && params.iter().all(|&t| t > 0.0)
            && params.iter().sum::<f64>() <= self.c
    }
}

/// Membership test for the simplex support.
pub fn prior_contains(tau: &[f64], prior: &SimplexPrior) -> bool {
    prior.contains(tau)
}

/// Hyper-cube support with closed per-dimension bounds: the simpler
/// restriction the simplex replaces, kept for comparison and used as the
/// uniform prior on the power-exponential rates in the dense model.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxPrior {
    bounds: Vec<(f64, f64)>,
}

impl BoxPrior {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &bounds {
            if !(hi > lo) {
                return Err(Error::InvalidArgument(format!(
                    "box prior needs lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        if bounds.is_empty() {
            return Err(Error::EmptyInput("box prior bounds".into()));
        }
        Ok(BoxPrior { bounds })
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn mean_width(&self) -> f64 {
        self.bounds.iter().map(|&(lo, hi)| hi - lo).sum::<f64>() / self.bounds.len() as f64
    }
}

impl ParamSupport for BoxPrior {
    fn dim(&self) -> usize {
        self.bounds.len()
    }

    fn contains(&self, params: &[f64]) -> bool {
        params.len() == self.bounds.len()
            && params
                .iter()
                .zip(&self.bounds)
                .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }
}
