//! One-dimensional correlation families and their anisotropic product form.
//!
//! Two compactly supported families (Bohman and truncated power) drop to an
//! exact zero at separation `tau`, which is what makes the training
//! correlation matrix sparse. The strictly positive power-exponential family
//! is kept for the dense reference model and for generating synthetic data.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A one-dimensional correlation family.
///
/// `Bohman` and `TruncatedPower` are compactly supported: they take the
/// value 0.0 (bit-exact) for separations at or beyond the range `tau`
/// supplied at evaluation time. `PowerExponential` is strictly positive and
/// carries its own rate `phi`; the range vector entry for such a dimension
/// is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum CorrelationFamily {
    Bohman,
    #[serde(rename = "truncpow")]
    TruncatedPower { alpha: f64, nu: f64 },
    #[serde(rename = "powexp")]
    PowerExponential { alpha: f64, phi: f64 },
}

impl CorrelationFamily {
    /// Truncated power family with a validated `(alpha, nu)` pair.
    ///
    /// Only published sufficient conditions are admitted: `alpha = 1` with
    /// `nu >= 1`, `alpha = 3/2` with `nu >= 2`, and `alpha = 5/3` with
    /// `nu >= 3` (each factor is one-dimensional inside the product). When
    /// `nu` is `None` the minimal valid value for the chosen `alpha` is
    /// used. Anything else is rejected; see
    /// [`ProductCorrelationModel::new_with_waiver`] for the escape hatch.
    pub fn truncated_power(alpha: f64, nu: Option<f64>) -> Result<Self> {
        let required = tabulated_nu_bound(alpha).ok_or(Error::InvalidTruncatedPower {
            alpha,
            nu: nu.unwrap_or(f64::NAN),
            required: f64::NAN,
        })?;
        let nu = nu.unwrap_or(required);
        if nu < required {
            return Err(Error::InvalidTruncatedPower {
                alpha,
                nu,
                required,
            });
        }
        Ok(CorrelationFamily::TruncatedPower { alpha, nu })
    }

    /// Power-exponential family; `alpha` in [1, 2], `phi > 0`.
    pub fn power_exponential(alpha: f64, phi: f64) -> Result<Self> {
        if !(1.0..=2.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "power exponential alpha must lie in [1, 2], got {alpha}"
            )));
        }
        if !(phi > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "power exponential phi must be positive, got {phi}"
            )));
        }
        Ok(CorrelationFamily::PowerExponential { alpha, phi })
    }

    /// Whether the family is exactly zero beyond a finite range.
    pub fn compact_support(&self) -> bool {
        !matches!(self, CorrelationFamily::PowerExponential { .. })
    }

    /// Checks the family's parameters, enforcing the tabulated
    /// truncated-power validity bounds unless `waiver` is set.
    fn validate(&self, waiver: bool) -> Result<()> {
        match *self {
            CorrelationFamily::Bohman => Ok(()),
            CorrelationFamily::TruncatedPower { alpha, nu } => {
                if !(alpha > 0.0 && alpha < 2.0) {
                    return Err(Error::InvalidArgument(format!(
                        "truncated power alpha must lie in (0, 2), got {alpha}"
                    )));
                }
                if !(nu > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "truncated power nu must be positive, got {nu}"
                    )));
                }
                if waiver {
                    return Ok(());
                }
                match tabulated_nu_bound(alpha) {
                    Some(required) if nu >= required => Ok(()),
                    Some(required) => Err(Error::InvalidTruncatedPower {
                        alpha,
                        nu,
                        required,
                    }),
                    None => Err(Error::InvalidTruncatedPower {
                        alpha,
                        nu,
                        required: f64::NAN,
                    }),
                }
            }
            CorrelationFamily::PowerExponential { alpha, phi } => {
                if !(1.0..=2.0).contains(&alpha) {
                    return Err(Error::InvalidArgument(format!(
                        "power exponential alpha must lie in [1, 2], got {alpha}"
                    )));
                }
                if !(phi > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "power exponential phi must be positive, got {phi}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Evaluates the family at separation `t >= 0` with range `tau`.
    #[inline]
    pub fn evaluate(&self, t: f64, tau: f64) -> f64 {
        match *self {
            CorrelationFamily::Bohman => bohman(t, tau),
            CorrelationFamily::TruncatedPower { alpha, nu } => {
                truncated_power(t, tau, alpha, nu)
            }
            CorrelationFamily::PowerExponential { alpha, phi } => {
                power_exponential(t, phi, alpha)
            }
        }
    }
}

/// Minimal valid truncated-power exponent for the tabulated `alpha` values,
/// taken per one-dimensional factor: Askey's bound for `alpha = 1`, and the
/// published sufficient pairs for `alpha = 3/2` and `alpha = 5/3`.
fn tabulated_nu_bound(alpha: f64) -> Option<f64> {
    const TOL: f64 = 1e-9;
    if (alpha - 1.0).abs() < TOL {
        Some(1.0)
    } else if (alpha - 1.5).abs() < TOL {
        Some(2.0)
    } else if (alpha - 5.0 / 3.0).abs() < TOL {
        Some(3.0)
    } else {
        None
    }
}

/// Bohman correlation: `(1 - t/tau) cos(pi t/tau) + sin(pi t/tau)/pi` for
/// `t < tau`, exactly 0 at and beyond `tau`.
#[inline]
pub fn bohman(t: f64, tau: f64) -> f64 {
    debug_assert!(t >= 0.0 && tau > 0.0);
    if t >= tau {
        return 0.0;
    }
    let s = t / tau;
    let a = std::f64::consts::PI * s;
    (1.0 - s) * a.cos() + a.sin() / std::f64::consts::PI
}

/// Truncated power correlation: `[1 - (t/tau)^alpha]^nu` for `t < tau`,
/// exactly 0 at and beyond `tau`.
#[inline]
pub fn truncated_power(t: f64, tau: f64, alpha: f64, nu: f64) -> f64 {
    debug_assert!(t >= 0.0 && tau > 0.0);
    if t >= tau {
        return 0.0;
    }
    (1.0 - (t / tau).powf(alpha)).powf(nu)
}

/// Power-exponential correlation `exp(-phi t^alpha)`; strictly positive.
#[inline]
pub fn power_exponential(t: f64, phi: f64, alpha: f64) -> f64 {
    debug_assert!(t >= 0.0);
    (-phi * t.powf(alpha)).exp()
}

/// Rate `phi` such that the power-exponential correlation equals 0.05 at
/// distance `r`: `phi = -ln(0.05) / r^alpha`.
pub fn effective_range_to_phi(r: f64, alpha: f64) -> f64 {
    debug_assert!(r > 0.0);
    -(0.05f64).ln() / r.powf(alpha)
}

/// Per-dimension support ranges, strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeVector(Vec<f64>);

impl RangeVector {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        for &t in &tau {
            if !(t > 0.0) {
                return Err(Error::NonPositiveRange(t));
            }
        }
        if tau.is_empty() {
            return Err(Error::EmptyInput("range vector".into()));
        }
        Ok(RangeVector(tau))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for RangeVector {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// Anisotropic product correlation: one family and one range per dimension.
#[derive(Debug, Clone)]
pub struct ProductCorrelationModel {
    families: Vec<CorrelationFamily>,
    ranges: RangeVector,
}

impl ProductCorrelationModel {
    /// Builds a validated model; family and range vectors must have equal
    /// length and truncated-power parameters must satisfy the tabulated
    /// validity bounds.
    pub fn new(families: Vec<CorrelationFamily>, ranges: RangeVector) -> Result<Self> {
        Self::build(families, ranges, false)
    }

    /// Like [`ProductCorrelationModel::new`] but skips the truncated-power
    /// validity table, admitting any `alpha` in (0, 2) with a user-supplied
    /// `nu`. The resulting matrix is not guaranteed positive definite.
    pub fn new_with_waiver(
        families: Vec<CorrelationFamily>,
        ranges: RangeVector,
    ) -> Result<Self> {
        Self::build(families, ranges, true)
    }

    fn build(
        families: Vec<CorrelationFamily>,
        ranges: RangeVector,
        waiver: bool,
    ) -> Result<Self> {
        if families.len() != ranges.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} families vs {} ranges",
                families.len(),
                ranges.len()
            )));
        }
        for f in &families {
            f.validate(waiver)?;
        }
        Ok(ProductCorrelationModel { families, ranges })
    }

    /// Same compact family in every dimension with the given ranges.
    pub fn isotropic_family(family: CorrelationFamily, ranges: RangeVector) -> Result<Self> {
        let families = vec![family; ranges.len()];
        Self::new(families, ranges)
    }

    /// Pure power-exponential model (dense path); ranges are placeholders.
    pub fn power_exponential(alphas: &[f64], phis: &[f64]) -> Result<Self> {
        if alphas.len() != phis.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} alphas vs {} phis",
                alphas.len(),
                phis.len()
            )));
        }
        let families = alphas
            .iter()
            .zip(phis)
            .map(|(&a, &p)| CorrelationFamily::power_exponential(a, p))
            .collect::<Result<Vec<_>>>()?;
        let ranges = RangeVector::new(vec![1.0; alphas.len()])?;
        Ok(ProductCorrelationModel { families, ranges })
    }

    pub fn dim(&self) -> usize {
        self.families.len()
    }

    pub fn families(&self) -> &[CorrelationFamily] {
        &self.families
    }

    pub fn ranges(&self) -> &RangeVector {
        &self.ranges
    }

    /// True when every dimension has a compactly supported family.
    pub fn compact_support(&self) -> bool {
        self.families.iter().all(CorrelationFamily::compact_support)
    }

    /// One-dimensional correlation in dimension `k` at separation `t`.
    #[inline]
    pub fn correlation_1d(&self, k: usize, t: f64) -> f64 {
        self.families[k].evaluate(t, self.ranges[k])
    }

    /// Product correlation between two points; exactly 0 as soon as any
    /// compactly supported dimension is separated by at least its range.
    pub fn correlation(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        if x.len() != self.dim() || x2.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "points of dim {} and {} against model of dim {}",
                x.len(),
                x2.len(),
                self.dim()
            )));
        }
        let mut r = 1.0;
        for k in 0..self.dim() {
            let v = self.correlation_1d(k, (x[k] - x2[k]).abs());
            if v == 0.0 {
                return Ok(0.0);
            }
            r *= v;
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bohman_endpoints_and_midpoint() {
        assert_eq!(bohman(0.0, 0.3), 1.0);
        assert_eq!(bohman(0.3, 0.3), 0.0);
        assert_eq!(bohman(0.5, 0.3), 0.0);
        // (1 - 1/2) cos(pi/2) + sin(pi/2)/pi = 1/pi, evaluated independently
        assert_relative_eq!(bohman(0.15, 0.3), 0.31830988618379075, epsilon = 1e-14);
    }

    #[test]
    fn truncated_power_values() {
        assert_eq!(truncated_power(0.0, 1.0, 1.5, 2.0), 1.0);
        assert_eq!(truncated_power(1.0, 1.0, 1.5, 2.0), 0.0);
        // (1 - 0.5^1.5)^2, evaluated independently
        assert_relative_eq!(
            truncated_power(0.5, 1.0, 1.5, 2.0),
            0.41789321881345254,
            epsilon = 1e-14
        );
    }

    #[test]
    fn truncated_power_validity_table() {
        assert!(CorrelationFamily::truncated_power(1.5, Some(2.0)).is_ok());
        assert!(CorrelationFamily::truncated_power(5.0 / 3.0, Some(3.0)).is_ok());
        assert!(CorrelationFamily::truncated_power(1.0, Some(1.0)).is_ok());
        assert!(CorrelationFamily::truncated_power(1.5, Some(1.5)).is_err());
        assert!(CorrelationFamily::truncated_power(5.0 / 3.0, Some(2.0)).is_err());
        // untabulated alpha rejected without a waiver
        assert!(CorrelationFamily::truncated_power(1.8, Some(10.0)).is_err());
        // defaults are the minimal valid values
        assert_eq!(
            CorrelationFamily::truncated_power(1.5, None).unwrap(),
            CorrelationFamily::TruncatedPower {
                alpha: 1.5,
                nu: 2.0
            }
        );
        assert_eq!(
            CorrelationFamily::truncated_power(1.0, None).unwrap(),
            CorrelationFamily::TruncatedPower {
                alpha: 1.0,
                nu: 1.0
            }
        );
    }

    #[test]
    fn waiver_admits_untabulated_alpha() {
        let fam = CorrelationFamily::TruncatedPower {
            alpha: 1.8,
            nu: 10.0,
        };
        let ranges = RangeVector::new(vec![0.5]).unwrap();
        assert!(ProductCorrelationModel::new(vec![fam.clone()], ranges.clone()).is_err());
        assert!(ProductCorrelationModel::new_with_waiver(vec![fam], ranges).is_ok());
    }

    #[test]
    fn power_exponential_values() {
        assert_eq!(power_exponential(0.0, 5.0, 1.5), 1.0);
        // exp(-5), from the illustrative covariance exp{-5 |x-x'|^1.5}
        assert_relative_eq!(
            power_exponential(1.0, 5.0, 1.5),
            0.006737946999085467,
            epsilon = 1e-14
        );
        // strictly decreasing in t
        let mut prev = 1.0;
        for i in 1..=100 {
            let v = power_exponential(i as f64 / 20.0, 5.0, 1.5);
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
    }

    #[test]
    fn effective_range_inverts_to_exact_cutoff() {
        // -ln(0.05)/r^alpha, digits frozen from an independent evaluation
        assert_relative_eq!(
            effective_range_to_phi(0.5, 1.5),
            8.473210420997681,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            effective_range_to_phi(2.0, 1.99),
            0.7541423098348059,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            effective_range_to_phi(1.0, 1.37),
            2.995732273553991,
            epsilon = 1e-12
        );
        for &(r, a) in &[(0.5, 1.5), (2.0, 1.99), (1.0, 1.0)] {
            let phi = effective_range_to_phi(r, a);
            assert_relative_eq!(power_exponential(r, phi, a), 0.05, epsilon = 1e-12);
        }
    }

    #[test]
    fn compact_families_are_exactly_zero_beyond_range() {
        for t in [0.3, 0.31, 0.5, 1.0, 7.0] {
            assert_eq!(bohman(t, 0.3).to_bits(), 0.0f64.to_bits());
            assert_eq!(truncated_power(t, 0.3, 1.5, 2.0).to_bits(), 0.0f64.to_bits());
        }
    }

    #[test]
    fn families_nonincreasing_on_grid() {
        let fams = [
            CorrelationFamily::Bohman,
            CorrelationFamily::TruncatedPower {
                alpha: 1.5,
                nu: 2.0,
            },
            CorrelationFamily::TruncatedPower {
                alpha: 1.0,
                nu: 1.0,
            },
            CorrelationFamily::PowerExponential {
                alpha: 1.5,
                phi: 5.0,
            },
        ];
        let tau = 0.7;
        for fam in &fams {
            assert_eq!(fam.evaluate(0.0, tau), 1.0);
            let mut prev = 1.0;
            for i in 1..=1000 {
                let t = tau * i as f64 / 1000.0;
                let v = fam.evaluate(t, tau);
                assert!(
                    v <= prev + 1e-15,
                    "{fam:?} increased at t={t}: {v} > {prev}"
                );
                assert!((0.0..=1.0).contains(&v));
                prev = v;
            }
        }
    }

    #[test]
    fn product_short_circuits_and_multiplies() {
        let model = ProductCorrelationModel::isotropic_family(
            CorrelationFamily::Bohman,
            RangeVector::new(vec![0.5, 0.5]).unwrap(),
        )
        .unwrap();
        assert_eq!(model.correlation(&[0.2, 0.9], &[0.2, 0.9]).unwrap(), 1.0);
        // separation 0.6 >= tau in dimension 0 kills the product exactly
        let z = model.correlation(&[0.0, 0.4], &[0.6, 0.5]).unwrap();
        assert_eq!(z.to_bits(), 0.0f64.to_bits());
        // product of two independently evaluated 1-D values: (1/pi)^2
        assert_relative_eq!(
            model.correlation(&[0.0, 0.0], &[0.25, 0.25]).unwrap(),
            0.10132118364233779,
            epsilon = 1e-14
        );
        assert!(model
            .correlation(&[0.0, 0.0, 0.0], &[0.1, 0.1, 0.1])
            .is_err());
    }

    #[test]
    fn product_is_symmetric() {
        let model = ProductCorrelationModel::new(
            vec![
                CorrelationFamily::Bohman,
                CorrelationFamily::truncated_power(1.5, None).unwrap(),
            ],
            RangeVector::new(vec![0.4, 0.8]).unwrap(),
        )
        .unwrap();
        let pts = [[0.1, 0.2], [0.35, 0.9], [0.5, 0.5], [0.99, 0.01]];
        for a in &pts {
            for b in &pts {
                assert_eq!(
                    model.correlation(a, b).unwrap(),
                    model.correlation(b, a).unwrap()
                );
            }
        }
    }

    #[test]
    fn range_vector_rejects_nonpositive() {
        assert!(RangeVector::new(vec![0.5, 0.0]).is_err());
        assert!(RangeVector::new(vec![0.5, -1.0]).is_err());
        assert!(RangeVector::new(vec![]).is_err());
        assert!(RangeVector::new(vec![0.5, 0.1]).is_ok());
    }
}
