//! Tensor-product shifted-Legendre regression bases and the preliminary
//! basis-selection procedure.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::eval::nse;
use crate::{Error, Result};

/// Maximum degree `p`, maximum number of interacting dimensions `m`, and
/// the input dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub p: usize,
    pub m: usize,
    pub d: usize,
}

impl BasisSpec {
    pub fn new(p: usize, m: usize, d: usize) -> Result<Self> {
        if m < 1 || m > d {
            return Err(Error::InvalidArgument(format!(
                "basis spec requires 1 <= m <= d, got m={m}, d={d}"
            )));
        }
        Ok(BasisSpec { p, m, d })
    }
}

/// A multi-index of per-dimension exponents; the intercept is all zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermIndex(pub Vec<usize>);

impl TermIndex {
    pub fn total_degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn active_dims(&self) -> usize {
        self.0.iter().filter(|&&a| a > 0).count()
    }
}

/// Shifted Legendre polynomial `P_k(2x - 1)` on [0, 1].
///
/// Errors when `x` lies outside the unit interval; the unchecked recurrence
/// is available as [`legendre_value`] for extrapolation-tolerant callers.
pub fn legendre_shifted(k: usize, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange {
            value: x,
            lo: 0.0,
            hi: 1.0,
            dim: 0,
            row: 0,
        });
    }
    Ok(legendre_value(k, 2.0 * x - 1.0))
}

/// Legendre polynomial `P_k(z)` by the three-term recurrence, valid for any
/// real `z` (used unchecked when predictions extrapolate past the training
/// box).
#[inline]
pub fn legendre_value(k: usize, z: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut p_prev = 1.0;
    let mut p = z;
    for i in 1..k {
        let next = ((2 * i + 1) as f64 * z * p - i as f64 * p_prev) / (i + 1) as f64;
        p_prev = p;
        p = next;
    }
    p
}

/// All admissible terms in graded-lexicographic order: ascending total
/// degree, ties broken by ascending lexicographic comparison of the
/// exponent tuple. The intercept comes first.
pub fn enumerate_terms(spec: &BasisSpec) -> Vec<TermIndex> {
    let mut terms = Vec::new();
    let mut exps = vec![0usize; spec.d];
    collect_terms(spec, 0, 0, 0, &mut exps, &mut terms);
    terms.sort_by(|a, b| {
        a.total_degree()
            .cmp(&b.total_degree())
            .then_with(|| a.0.cmp(&b.0))
    });
    terms
}

fn collect_terms(
    spec: &BasisSpec,
    dim: usize,
    degree: usize,
    active: usize,
    exps: &mut Vec<usize>,
    out: &mut Vec<TermIndex>,
) {
    if dim == spec.d {
        out.push(TermIndex(exps.clone()));
        return;
    }
    for a in 0..=(spec.p - degree) {
        let active = active + usize::from(a > 0);
        if active > spec.m {
            break;
        }
        exps[dim] = a;
        collect_terms(spec, dim + 1, degree + a, active, exps, out);
    }
    exps[dim] = 0;
}

/// The regression design `F` together with the terms that generated its
/// columns.
#[derive(Debug, Clone)]
pub struct BasisMatrix {
    matrix: DMatrix<f64>,
    terms: Vec<TermIndex>,
}

impl BasisMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn terms(&self) -> &[TermIndex] {
        &self.terms
    }

    pub fn q(&self) -> usize {
        self.terms.len()
    }

    /// Exports the exponent tuples as CSV (`term, a1..ad`).
    pub fn write_terms_csv<W: Write>(&self, w: W) -> Result<()> {
        write_terms_csv(&self.terms, w)
    }
}

/// Exports a term list as CSV of exponent tuples.
pub fn write_terms_csv<W: Write>(terms: &[TermIndex], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let d = terms.first().map_or(0, |t| t.0.len());
    let mut header = vec!["term".to_string()];
    header.extend((1..=d).map(|k| format!("a{k}")));
    wtr.write_record(&header)?;
    for (j, t) in terms.iter().enumerate() {
        let mut rec = vec![j.to_string()];
        rec.extend(t.0.iter().map(|a| a.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Builds the `n x q` regression matrix for a design in the unit cube.
pub fn build_basis_matrix(x: &DesignMatrix, spec: &BasisSpec) -> Result<BasisMatrix> {
    if x.d() != spec.d {
        return Err(Error::DimensionMismatch(format!(
            "design has d={}, basis spec has d={}",
            x.d(),
            spec.d
        )));
    }
    let terms = enumerate_terms(spec);
    let matrix = evaluate_terms(x.matrix(), &terms, spec.p);
    Ok(BasisMatrix { matrix, terms })
}

/// Evaluates a term list at arbitrary points (rows), without the unit-cube
/// domain check. Prediction inputs outside the training box extrapolate.
pub fn evaluate_terms(points: &DMatrix<f64>, terms: &[TermIndex], max_degree: usize) -> DMatrix<f64> {
    let n = points.nrows();
    let d = points.ncols();
    let q = terms.len();
    // per-point table of P_0..P_p in every dimension
    let mut table = vec![0.0; d * (max_degree + 1)];
    let mut out = DMatrix::zeros(n, q);
    for i in 0..n {
        for k in 0..d {
            let z = 2.0 * points[(i, k)] - 1.0;
            table[k * (max_degree + 1)] = 1.0;
            if max_degree >= 1 {
                table[k * (max_degree + 1) + 1] = z;
            }
            for deg in 1..max_degree {
                let p = table[k * (max_degree + 1) + deg];
                let p_prev = table[k * (max_degree + 1) + deg - 1];
                table[k * (max_degree + 1) + deg + 1] =
                    ((2 * deg + 1) as f64 * z * p - deg as f64 * p_prev) / (deg + 1) as f64;
            }
        }
        for (j, term) in terms.iter().enumerate() {
            let mut v = 1.0;
            for (k, &a) in term.0.iter().enumerate() {
                if a > 0 {
                    v *= table[k * (max_degree + 1) + a];
                }
            }
            out[(i, j)] = v;
        }
    }
    out
}

/// Score of one candidate in the basis-selection sweep.
#[derive(Debug, Clone)]
pub struct CandidateScore {
    pub spec: BasisSpec,
    pub q: usize,
    pub nse: f64,
}

/// Outcome of [`select_basis`]: the per-candidate report and the winner.
#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub scores: Vec<CandidateScore>,
    pub best: BasisSpec,
}

/// NSE differences below this are treated as ties (broken toward smaller
/// `q`); guards exact-recovery candidates against roundoff.
const NSE_TIE_EPS: f64 = 1e-9;

/// Fits ordinary least squares on the training set for each candidate and
/// scores the fitted mean on the holdout by Nash-Sutcliffe efficiency.
pub fn select_basis(
    x_train: &DesignMatrix,
    y_train: &DVector<f64>,
    x_holdout: &DesignMatrix,
    y_holdout: &DVector<f64>,
    candidates: &[BasisSpec],
) -> Result<SelectionReport> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("candidate list".into()));
    }
    if x_train.n() != y_train.len() || x_holdout.n() != y_holdout.len() {
        return Err(Error::DimensionMismatch(
            "design and response lengths differ".into(),
        ));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    for spec in candidates {
        let fb = build_basis_matrix(x_train, spec)?;
        let q = fb.q();
        if x_train.n() <= q {
            return Err(Error::TooFewObservations { n: x_train.n(), q });
        }
        let beta = ols_fit(fb.matrix(), y_train, spec)?;
        let f0 = evaluate_terms(x_holdout.matrix(), fb.terms(), spec.p);
        let pred = &f0 * &beta;
        let score = nse(pred.as_slice(), y_holdout.as_slice())?;
        scores.push(CandidateScore {
            spec: *spec,
            q,
            nse: score,
        });
    }
    let max_nse = scores.iter().map(|s| s.nse).fold(f64::NEG_INFINITY, f64::max);
    let best = scores
        .iter()
        .filter(|s| s.nse >= max_nse - NSE_TIE_EPS)
        .min_by_key(|s| s.q)
        .expect("non-empty scores")
        .spec;
    Ok(SelectionReport { scores, best })
}

/// Ordinary least squares via column-pivoted QR, rejecting rank-deficient
/// bases with the offending spec.
fn ols_fit(f: &DMatrix<f64>, y: &DVector<f64>, spec: &BasisSpec) -> Result<DVector<f64>> {
    let q = f.ncols();
    let qr = f.clone().col_piv_qr();
    let eps = f64::EPSILON * f.nrows().max(q) as f64 * f.amax();
    let rank = qr.rank(eps);
    if rank < q {
        return Err(Error::RankDeficientBasis {
            p: spec.p,
            m: spec.m,
            rank,
            cols: q,
        });
    }
    qr.solve(&y.clone()).ok_or(Error::RankDeficientBasis {
        p: spec.p,
        m: spec.m,
        rank,
        cols: q,
    })
}
