//! Compact-support pair discovery, sparse symmetric correlation matrices,
//! and their Cholesky factorization: the four costly steps of the
//! likelihood evaluation.

mod cholesky;
pub(crate) mod ordering;

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::correlation::{ProductCorrelationModel, RangeVector};
use crate::design::DesignMatrix;
use crate::{Error, Result};

pub use cholesky::{CholeskyFactor, SolveWorkspace, SymbolicFactor};

/// Index pairs `(i, j)`, `i < j`, whose correlation is structurally
/// nonzero: every per-dimension separation is strictly below its range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborPairs {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl NeighborPairs {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn as_slice(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Structural nonzero proportion among the `n(n-1)/2` off-diagonal
    /// pairs.
    pub fn nonzero_proportion(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.pairs.len() as f64 / (self.n * (self.n - 1) / 2) as f64
    }
}

/// Occupancy threshold above which the sorted sweep degenerates and an
/// exhaustive scan is cheaper.
const SWEEP_OCCUPANCY_LIMIT: f64 = 0.5;

/// Finds exactly the pairs with all per-dimension separations strictly
/// below `tau`, sorted by `(i, j)`.
///
/// Points are sorted along the dimension with the smallest range and swept
/// with a moving window, filtering the remaining dimensions; when the
/// predicted window occupancy exceeds 50% an exhaustive scan is used
/// instead.
pub fn find_interacting_pairs(x: &DesignMatrix, tau: &RangeVector) -> NeighborPairs {
    assert_eq!(x.d(), tau.len(), "design and range dimensions differ");
    let n = x.n();
    let d = x.d();
    let (k_min, tau_min) = (0..d)
        .map(|k| (k, tau[k]))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .expect("d >= 1");

    let within = |i: usize, j: usize| -> bool {
        (0..d).all(|k| (x.coord(i, k) - x.coord(j, k)).abs() < tau[k])
    };

    let mut pairs = Vec::new();
    if (2.0 * tau_min).min(1.0) > SWEEP_OCCUPANCY_LIMIT {
        for i in 0..n {
            for j in (i + 1)..n {
                if within(i, j) {
                    pairs.push((i, j));
                }
            }
        }
        return NeighborPairs { n, pairs };
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        x.coord(a, k_min)
            .partial_cmp(&x.coord(b, k_min))
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut lo = 0usize;
    for b in 0..n {
        let i = order[b];
        let xi = x.coord(i, k_min);
        while xi - x.coord(order[lo], k_min) >= tau_min {
            lo += 1;
        }
        for &j in &order[lo..b] {
            if within(i, j) {
                pairs.push(if i < j { (i, j) } else { (j, i) });
            }
        }
    }
    pairs.sort_unstable();
    NeighborPairs { n, pairs }
}

/// Compressed-row symmetric matrix storing the upper triangle including the
/// diagonal; within each row the diagonal entry comes first and the
/// remaining columns ascend.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries (upper triangle including diagonal).
    pub fn nnz_stored(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates stored `(row, col, value)` entries, `row <= col`.
    pub fn iter_upper(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |t| (i, self.col_idx[t], self.values[t]))
        })
    }

    /// Structural nonzero proportion among off-diagonal elements of the
    /// full symmetric matrix (`2 nnz_offdiag / (n(n-1))`); the complementary
    /// "percentage of zeros" convention is `1 -` this value.
    pub fn sparsity(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let off = self.nnz_stored() - self.n;
        (2 * off) as f64 / (self.n * (self.n - 1)) as f64
    }

    /// Dense copy (tests and small problems only).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.iter_upper() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Binary dump: magic `SPCM`, little-endian u64 `n` and `nnz`, row
    /// pointers, column indices, then IEEE-754 doubles.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"SPCM")?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.nnz_stored() as u64).to_le_bytes())?;
        for &p in &self.row_ptr {
            w.write_all(&(p as u64).to_le_bytes())?;
        }
        for &c in &self.col_idx {
            w.write_all(&(c as u64).to_le_bytes())?;
        }
        for &v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"SPCM" {
            return Err(Error::Schema("bad magic bytes in sparse matrix dump".into()));
        }
        let mut buf8 = [0u8; 8];
        r.read_exact(&mut buf8)?;
        let n = u64::from_le_bytes(buf8) as usize;
        r.read_exact(&mut buf8)?;
        let nnz = u64::from_le_bytes(buf8) as usize;
        let mut row_ptr = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            r.read_exact(&mut buf8)?;
            row_ptr.push(u64::from_le_bytes(buf8) as usize);
        }
        let mut col_idx = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            r.read_exact(&mut buf8)?;
            col_idx.push(u64::from_le_bytes(buf8) as usize);
        }
        let mut values = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            r.read_exact(&mut buf8)?;
            values.push(f64::from_le_bytes(buf8));
        }
        if row_ptr.len() != n + 1 || *row_ptr.last().unwrap_or(&0) != nnz {
            return Err(Error::Schema("inconsistent sparse matrix dump".into()));
        }
        Ok(SparseSymMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }
}

/// Assembles the sparse correlation matrix from a precomputed pair list;
/// products that round to exactly zero are dropped from the structure.
pub fn assemble_sparse_correlation(
    x: &DesignMatrix,
    model: &ProductCorrelationModel,
    pairs: &NeighborPairs,
) -> Result<SparseSymMatrix> {
    if !model.compact_support() {
        return Err(Error::NonCompactFamily);
    }
    if x.d() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "design dimension {} vs model dimension {}",
            x.d(),
            model.dim()
        )));
    }
    let n = x.n();
    let d = x.d();
    let mut kept: Vec<(usize, usize, f64)> = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs.as_slice() {
        let mut v = 1.0;
        for k in 0..d {
            v *= model.correlation_1d(k, (x.coord(i, k) - x.coord(j, k)).abs());
            if v == 0.0 {
                break;
            }
        }
        if v != 0.0 {
            kept.push((i, j, v));
        }
    }
    let mut counts = vec![1usize; n]; // the unit diagonal
    for &(i, _, _) in &kept {
        counts[i] += 1;
    }
    let mut row_ptr = vec![0usize; n + 1];
    for i in 0..n {
        row_ptr[i + 1] = row_ptr[i] + counts[i];
    }
    let nnz = row_ptr[n];
    let mut col_idx = vec![0usize; nnz];
    let mut values = vec![0.0f64; nnz];
    let mut cursor = row_ptr[..n].to_vec();
    for i in 0..n {
        col_idx[cursor[i]] = i;
        values[cursor[i]] = 1.0;
        cursor[i] += 1;
    }
    // pairs are sorted by (i, j), so each row's columns ascend after the diagonal
    for &(i, j, v) in &kept {
        col_idx[cursor[i]] = j;
        values[cursor[i]] = v;
        cursor[i] += 1;
    }
    Ok(SparseSymMatrix {
        n,
        row_ptr,
        col_idx,
        values,
    })
}

/// Pair discovery plus assembly: the sparse correlation matrix of a
/// compactly supported model over a design.
pub fn build_sparse_correlation(
    x: &DesignMatrix,
    model: &ProductCorrelationModel,
) -> Result<SparseSymMatrix> {
    if !model.compact_support() {
        return Err(Error::NonCompactFamily);
    }
    let pairs = find_interacting_pairs(x, model.ranges());
    assemble_sparse_correlation(x, model, &pairs)
}

/// Convenience wrapper: analyze and factorize in one call.
pub fn sparse_cholesky(matrix: &SparseSymMatrix) -> Result<CholeskyFactor> {
    SymbolicFactor::analyze(matrix).factorize(matrix, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::CorrelationFamily;
    use crate::design::latin_hypercube;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn brute_force_pairs(x: &DesignMatrix, tau: &RangeVector) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..x.n() {
            for j in (i + 1)..x.n() {
                if (0..x.d()).all(|k| (x.coord(i, k) - x.coord(j, k)).abs() < tau[k]) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    fn bohman_model(tau: Vec<f64>) -> ProductCorrelationModel {
        ProductCorrelationModel::isotropic_family(
            CorrelationFamily::Bohman,
            RangeVector::new(tau).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn pairs_all_when_ranges_cover_cube() {
        let x = latin_hypercube(12, 3, 4);
        let tau = RangeVector::new(vec![1.0, 1.1, 2.0]).unwrap();
        let pairs = find_interacting_pairs(&x, &tau);
        assert_eq!(pairs.len(), 12 * 11 / 2);
        assert_relative_eq!(pairs.nonzero_proportion(), 1.0);
    }

    #[test]
    fn pairs_empty_below_min_separation() {
        let x = latin_hypercube(30, 2, 8);
        let mut min_sep = f64::INFINITY;
        for i in 0..30 {
            for j in (i + 1)..30 {
                let s = (0..2)
                    .map(|k| (x.coord(i, k) - x.coord(j, k)).abs())
                    .fold(f64::NEG_INFINITY, f64::max);
                min_sep = min_sep.min(s);
            }
        }
        let tau = RangeVector::new(vec![min_sep * 0.99; 2]).unwrap();
        let pairs = find_interacting_pairs(&x, &tau);
        // at least the closest pair must drop out; usually all do
        assert!(pairs.len() < 30 * 29 / 2);
    }

    #[test]
    fn pairs_match_exhaustive_oracle() {
        let x = latin_hypercube(100, 4, 42);
        let tau = RangeVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let pairs = find_interacting_pairs(&x, &tau);
        assert_eq!(pairs.as_slice(), brute_force_pairs(&x, &tau).as_slice());
        // window fallback path (large ranges) agrees too
        let tau = RangeVector::new(vec![0.8, 0.9, 0.6, 0.7]).unwrap();
        let pairs = find_interacting_pairs(&x, &tau);
        assert_eq!(pairs.as_slice(), brute_force_pairs(&x, &tau).as_slice());
    }

    #[test]
    fn sparsity_monotone_in_ranges() {
        let x = latin_hypercube(60, 3, 5);
        let small = find_interacting_pairs(&x, &RangeVector::new(vec![0.1, 0.2, 0.15]).unwrap());
        let large = find_interacting_pairs(&x, &RangeVector::new(vec![0.2, 0.2, 0.3]).unwrap());
        let small_set: std::collections::HashSet<_> = small.as_slice().iter().collect();
        assert!(small.len() <= large.len());
        for p in small_set {
            assert!(large.as_slice().contains(p));
        }
    }

    #[test]
    fn assembly_matches_dense_oracle() {
        let x = latin_hypercube(200, 3, 77);
        let model = bohman_model(vec![0.25, 0.35, 0.5]);
        let sparse = build_sparse_correlation(&x, &model).unwrap();
        let dense = sparse.to_dense();
        for i in 0..200 {
            for j in 0..200 {
                let expected = model
                    .correlation(&x.point(i), &x.point(j))
                    .unwrap();
                assert!(
                    (dense[(i, j)] - expected).abs() <= 1e-15,
                    "entry ({i},{j}): {} vs {}",
                    dense[(i, j)],
                    expected
                );
            }
        }
        assert_relative_eq!(
            sparse.sparsity(),
            find_interacting_pairs(&x, model.ranges()).nonzero_proportion(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn identity_when_no_pairs_interact() {
        let x = DesignMatrix::new(nalgebra::DMatrix::from_row_slice(
            3,
            1,
            &[0.0, 0.5, 1.0],
        ))
        .unwrap();
        let model = bohman_model(vec![0.4]);
        let m = build_sparse_correlation(&x, &model).unwrap();
        assert_eq!(m.nnz_stored(), 3);
        assert_relative_eq!(m.sparsity(), 0.0);
        let f = sparse_cholesky(&m).unwrap();
        assert_relative_eq!(f.logdet(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn non_compact_model_rejected() {
        let x = latin_hypercube(10, 1, 2);
        let model = ProductCorrelationModel::power_exponential(&[1.5], &[5.0]).unwrap();
        assert!(matches!(
            build_sparse_correlation(&x, &model),
            Err(Error::NonCompactFamily)
        ));
    }

    #[test]
    fn two_by_two_hand_factorization() {
        let m = SparseSymMatrix {
            n: 2,
            row_ptr: vec![0, 2, 3],
            col_idx: vec![0, 1, 1],
            values: vec![1.0, 0.5, 1.0],
        };
        let f = SymbolicFactor::analyze_with_perm(&m, Some(vec![0, 1]))
            .factorize(&m, 0.0)
            .unwrap();
        // Q = [[1, 0.5], [0, sqrt(0.75)]]
        let w = f.solve_transposed(&nalgebra::DMatrix::identity(2, 2));
        let q_t = w.clone().try_inverse().unwrap(); // W = Q'^{-1} I
        assert_relative_eq!(q_t[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(q_t[(1, 0)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(q_t[(1, 1)], 0.75f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(f.logdet(), 0.75f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn logdet_diagonal_case() {
        let m = SparseSymMatrix {
            n: 2,
            row_ptr: vec![0, 1, 2],
            col_idx: vec![0, 1],
            values: vec![4.0, 9.0],
        };
        let f = sparse_cholesky(&m).unwrap();
        assert_relative_eq!(f.logdet(), 3.58351893845611, epsilon = 1e-12);
    }

    #[test]
    fn factorization_matches_dense_oracle() {
        let x = latin_hypercube(200, 2, 13);
        let model = bohman_model(vec![0.3, 0.4]);
        let m = build_sparse_correlation(&x, &model).unwrap();
        let f = sparse_cholesky(&m).unwrap();

        let dense = m.to_dense();
        let dense_chol = dense.clone().cholesky().expect("oracle factorization");
        let expected_logdet: f64 =
            2.0 * (0..200).map(|i| dense_chol.l_dirty()[(i, i)].ln()).sum::<f64>();
        assert_relative_eq!(f.logdet(), expected_logdet, max_relative = 1e-8);

        // residual of the reconstructed matrix, on the permuted ordering
        let n = m.n();
        let mut l = DMatrix::zeros(n, n);
        let w = f.solve_transposed(&DMatrix::identity(n, n));
        // W = L^{-1} P, so L = P W^{-1}; check via R = W^{-1}' W^{-1} pulled back
        let w_inv = w.try_inverse().unwrap();
        let rebuilt = w_inv.transpose() * &w_inv;
        for i in 0..n {
            for j in 0..n {
                l[(i, j)] = rebuilt[(i, j)];
            }
        }
        let max_resid = (&l - &dense).abs().max();
        assert!(max_resid <= 1e-10 * n as f64, "residual {max_resid}");
    }

    #[test]
    fn solves_and_quadratic_forms_match_dense() {
        let x = latin_hypercube(100, 2, 21);
        let model = bohman_model(vec![0.35, 0.45]);
        let m = build_sparse_correlation(&x, &model).unwrap();
        let f = sparse_cholesky(&m).unwrap();
        let y = DVector::from_fn(100, |i, _| ((i * 37 % 100) as f64 / 50.0) - 1.0);
        let b = DMatrix::from_columns(&[y.clone(), DVector::from_element(100, 1.0)]);

        let w = f.solve_transposed(&b);
        let quad = w.transpose() * &w;

        let dense = m.to_dense();
        let inv = dense.try_inverse().unwrap();
        let expected = b.transpose() * inv * &b;
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(quad[(i, j)], expected[(i, j)], max_relative = 1e-9);
            }
        }

        // identity factor returns the input
        let eye = SparseSymMatrix {
            n: 3,
            row_ptr: vec![0, 1, 2, 3],
            col_idx: vec![0, 1, 2],
            values: vec![1.0, 1.0, 1.0],
        };
        let fi = sparse_cholesky(&eye).unwrap();
        let b3 = DMatrix::from_row_slice(3, 1, &[1.0, -2.0, 3.0]);
        assert_eq!(fi.solve_transposed(&b3), b3);

        // multi-column solve equals stacked single-column solves
        let w0 = f.solve_transposed(&DMatrix::from_columns(&[y.clone()]));
        for i in 0..100 {
            assert_eq!(w[(i, 0)], w0[(i, 0)]);
        }
    }

    #[test]
    fn permutation_invariance_of_reported_quantities() {
        let x = latin_hypercube(80, 2, 3);
        let model = bohman_model(vec![0.4, 0.4]);
        let m = build_sparse_correlation(&x, &model).unwrap();
        let y = DMatrix::from_fn(80, 1, |i, _| (i as f64 * 0.13).sin());

        let natural: Vec<usize> = (0..80).collect();
        let mut reversed: Vec<usize> = natural.clone();
        reversed.reverse();
        let mut shuffled: Vec<usize> = (0..80).map(|i| (i * 37) % 80).collect();
        shuffled.sort_by_key(|&v| (v * 53) % 80);
        // make it a permutation
        let mut seen = vec![false; 80];
        shuffled.retain(|&v| {
            let keep = !seen[v];
            seen[v] = true;
            keep
        });
        for (i, s) in seen.iter().enumerate() {
            if !s {
                shuffled.push(i);
            }
        }

        let mut logdets = Vec::new();
        let mut quads = Vec::new();
        for perm in [None, Some(natural), Some(reversed), Some(shuffled)] {
            let f = SymbolicFactor::analyze_with_perm(&m, perm)
                .factorize(&m, 0.0)
                .unwrap();
            logdets.push(f.logdet());
            let w = f.solve_transposed(&y);
            quads.push((w.transpose() * &w)[(0, 0)]);
        }
        for i in 1..logdets.len() {
            assert_relative_eq!(logdets[0], logdets[i], max_relative = 1e-10);
            assert_relative_eq!(quads[0], quads[i], max_relative = 1e-10);
        }
    }

    #[test]
    fn not_positive_definite_reports_pivot() {
        // valid pattern but an invalid "correlation" value > 1 makes the
        // 2x2 block indefinite
        let m = SparseSymMatrix {
            n: 2,
            row_ptr: vec![0, 2, 3],
            col_idx: vec![0, 1, 1],
            values: vec![1.0, 1.5, 1.0],
        };
        match sparse_cholesky(&m) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn symbolic_reuse_and_pattern_guard() {
        let x = latin_hypercube(50, 2, 9);
        let model = bohman_model(vec![0.5, 0.5]);
        let m = build_sparse_correlation(&x, &model).unwrap();
        let sym = SymbolicFactor::analyze(&m);
        let f1 = sym.factorize(&m, 0.0).unwrap();
        let f2 = sym.factorize(&m, 0.0).unwrap();
        assert_eq!(f1.logdet(), f2.logdet());

        // different structure is rejected
        let other = bohman_model(vec![0.2, 0.2]);
        let m2 = build_sparse_correlation(&x, &other).unwrap();
        if m2.nnz_stored() != m.nnz_stored() || m2.col_idx() != m.col_idx() {
            assert!(matches!(
                sym.factorize(&m2, 0.0),
                Err(Error::PatternMismatch)
            ));
        }
    }

    #[test]
    fn sparse_forward_solve_matches_dense_solve() {
        let x = latin_hypercube(60, 2, 31);
        let model = bohman_model(vec![0.4, 0.5]);
        let m = build_sparse_correlation(&x, &model).unwrap();
        let f = sparse_cholesky(&m).unwrap();
        let mut ws = SolveWorkspace::new(60);

        let rhs_entries: Vec<(usize, f64)> = vec![(3, 0.7), (17, -0.2), (44, 1.1)];
        let mut dense_rhs = vec![0.0; 60];
        for &(i, v) in &rhs_entries {
            dense_rhs[i] = v;
        }
        let expected = f.solve_transposed_vec(&dense_rhs);
        f.sparse_forward_solve(&rhs_entries, &mut ws);
        for j in 0..60 {
            let got = if ws.pattern().contains(&j) { ws.value(j) } else { 0.0 };
            assert_relative_eq!(got, expected[j], epsilon = 1e-13, max_relative = 1e-10);
        }
        let expected_norm: f64 = expected.iter().map(|v| v * v).sum();
        assert_relative_eq!(ws.norm_squared(), expected_norm, max_relative = 1e-10);
        assert_relative_eq!(ws.dot(&expected), expected_norm, max_relative = 1e-10);
    }

    #[test]
    fn binary_dump_round_trip() {
        let x = latin_hypercube(25, 2, 2);
        let model = bohman_model(vec![0.5, 0.6]);
        let m = build_sparse_correlation(&x, &model).unwrap();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[0..4], b"SPCM");
        let back = SparseSymMatrix::read_binary(buf.as_slice()).unwrap();
        assert_eq!(m, back);
        assert!(SparseSymMatrix::read_binary(&b"XXXX0000"[..]).is_err());
    }
}
