//! Sparsity-cutoff calibration: the largest simplex cutoff `C` whose
//! worst-case structural nonzero proportion stays at or below a target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design::DesignMatrix;
use crate::sparsecov::find_interacting_pairs;
use crate::correlation::RangeVector;
use crate::{Error, Result};

/// Result of [`calibrate_cutoff`].
#[derive(Debug, Clone)]
pub struct CutoffReport {
    /// The calibrated cutoff.
    pub c: f64,
    /// Worst-case structural nonzero proportion found at `c` (heuristic
    /// maximum, not claimed globally optimal).
    pub achieved: f64,
    /// The range vector attaining `achieved`.
    pub worst_tau: Vec<f64>,
    /// Number of subsampled points when the design was reduced.
    pub subsample: Option<usize>,
}

const BISECTION_TOL: f64 = 1e-3;
const MAX_CALIBRATION_POINTS: usize = 2000;
const RESTARTS: usize = 8;
const SPLIT_GRID: [f64; 11] = [
    0.02, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.98,
];

/// Finds the largest `C` (bisection tolerance 1e-3) such that the maximum
/// structural nonzero proportion over range vectors on the face
/// `sum(tau) = C` stays at or below `s_target`. The inner maximization is a
/// multi-start coordinate ascent; designs larger than 2,000 points are
/// subsampled (reported in the result).
pub fn calibrate_cutoff(x: &DesignMatrix, s_target: f64, seed: u64) -> Result<CutoffReport> {
    if !(s_target > 0.0 && s_target <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sparsity target must lie in (0, 1], got {s_target}"
        )));
    }
    let d = x.d();
    if s_target >= 1.0 {
        // no constraint binds; ranges of 1 per dimension saturate the cube
        return Ok(CutoffReport {
            c: d as f64,
            achieved: 1.0,
            worst_tau: vec![1.0; d],
            subsample: None,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x_sub, subsample) = if x.n() > MAX_CALIBRATION_POINTS {
        (subsample_rows(x, MAX_CALIBRATION_POINTS, &mut rng), Some(MAX_CALIBRATION_POINTS))
    } else {
        (x.clone(), None)
    };

    // fixed start weights shared by every cutoff evaluation
    let starts = simplex_starts(d, RESTARTS, &mut rng);

    let c_min = 1e-4;
    let (p_min, tau_min) = worst_case_proportion(&x_sub, c_min, &starts);
    if p_min > s_target {
        return Err(Error::CutoffUnattainable {
            target: s_target,
            achieved: p_min,
            c_min,
        });
    }

    let mut lo = c_min;
    let mut lo_report = (p_min, tau_min);
    let mut hi = d as f64;
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let (p, tau) = worst_case_proportion(&x_sub, mid, &starts);
        if p <= s_target {
            lo = mid;
            lo_report = (p, tau);
        } else {
            hi = mid;
        }
    }

    Ok(CutoffReport {
        c: lo,
        achieved: lo_report.0,
        worst_tau: lo_report.1,
        subsample,
    })
}

fn subsample_rows(x: &DesignMatrix, m: usize, rng: &mut ChaCha8Rng) -> DesignMatrix {
    let mut idx: Vec<usize> = (0..x.n()).collect();
    // partial Fisher-Yates
    for i in 0..m {
        let j = i + rng.random_range(0..x.n() - i);
        idx.swap(i, j);
    }
    idx.truncate(m);
    idx.sort_unstable();
    let pts = nalgebra::DMatrix::from_fn(m, x.d(), |i, k| x.coord(idx[i], k));
    DesignMatrix::new(pts).expect("subsample of a valid design")
}

fn simplex_starts(d: usize, restarts: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut starts = vec![vec![1.0 / d as f64; d]];
    while starts.len() < restarts {
        // Dirichlet(1) via normalized exponentials, kept strictly interior
        let g: Vec<f64> = (0..d)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let sum: f64 = g.iter().sum();
        starts.push(g.iter().map(|v| (v / sum).max(1e-3)).collect());
    }
    starts
}

/// Heuristic maximum of the structural nonzero proportion over the face
/// `sum(tau) = c`: multi-start coordinate-pair ascent with a discrete split
/// grid.
fn worst_case_proportion(x: &DesignMatrix, c: f64, starts: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let d = x.d();
    let prop = |tau: &[f64]| -> f64 {
        let rv = RangeVector::new(tau.to_vec()).expect("positive ranges by construction");
        find_interacting_pairs(x, &rv).nonzero_proportion()
    };
    if d == 1 {
        let tau = vec![c];
        return (prop(&tau), tau);
    }

    let mut best = (f64::NEG_INFINITY, vec![0.0; d]);
    for w in starts {
        let mut tau: Vec<f64> = w.iter().map(|v| v * c).collect();
        let mut current = prop(&tau);
        for _sweep in 0..8 {
            let mut improved = false;
            for i in 0..d {
                for j in (i + 1)..d {
                    let mass = tau[i] + tau[j];
                    let mut local_best = (current, tau[i], tau[j]);
                    for &t in &SPLIT_GRID {
                        let (a, b) = (t * mass, (1.0 - t) * mass);
                        if a <= 0.0 || b <= 0.0 {
                            continue;
                        }
                        tau[i] = a;
                        tau[j] = b;
                        let p = prop(&tau);
                        if p > local_best.0 {
                            local_best = (p, a, b);
                        }
                    }
                    tau[i] = local_best.1;
                    tau[j] = local_best.2;
                    if local_best.0 > current {
                        current = local_best.0;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        if current > best.0 {
            best = (current, tau);
        }
    }
    best
}
