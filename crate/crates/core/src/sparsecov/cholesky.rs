//! Sparse Cholesky factorization with a fill-reducing permutation.
//!
//! The symbolic stage (ordering, elimination tree, column counts) depends
//! only on the sparsity pattern and is reusable across numeric
//! refactorizations with the same structure, which is the common case when
//! a Metropolis proposal is rejected and the next one lands on the same
//! neighbor set. The numeric stage is an up-looking factorization
//! `P R P' = L L'` computing one row of `L` at a time from the
//! elimination-tree reach of that row.

use nalgebra::DMatrix;

use super::SparseSymMatrix;
use crate::{Error, Result};

const NONE: usize = usize::MAX;

/// Pattern-only analysis of a sparse symmetric matrix: permutation,
/// elimination tree, and the column layout of the factor.
#[derive(Debug, Clone)]
pub struct SymbolicFactor {
    n: usize,
    perm: Vec<usize>,
    iperm: Vec<usize>,
    parent: Vec<usize>,
    // permuted pattern, upper triangle stored by column (rows <= column)
    c_col_ptr: Vec<usize>,
    c_row_idx: Vec<usize>,
    // map from the matrix's storage order into the permuted layout
    a_to_c: Vec<usize>,
    diag_pos: Vec<usize>,
    l_col_ptr: Vec<usize>,
    // pattern fingerprint for the factorize() safety check
    pattern_row_ptr: Vec<usize>,
    pattern_col_idx: Vec<usize>,
}

impl SymbolicFactor {
    /// Orders the matrix with minimum degree and computes the elimination
    /// tree and factor column counts.
    pub fn analyze(a: &SparseSymMatrix) -> Self {
        Self::analyze_with_perm(a, None)
    }

    /// Like [`SymbolicFactor::analyze`] with a caller-supplied permutation
    /// (`perm[k]` = original index of the k-th pivot); used by tests to
    /// verify permutation invariance.
    pub fn analyze_with_perm(a: &SparseSymMatrix, perm: Option<Vec<usize>>) -> Self {
        let n = a.n();
        let perm = perm.unwrap_or_else(|| {
            let mut adj = vec![Vec::new(); n];
            for (i, j, _) in a.iter_upper() {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
            super::ordering::min_degree_ordering(n, &adj)
        });
        let mut iperm = vec![0usize; n];
        for (k, &old) in perm.iter().enumerate() {
            iperm[old] = k;
        }

        // permuted upper-triangle pattern, by column
        let nnz = a.nnz_stored();
        let mut col_count = vec![0usize; n];
        for (i, j, _) in a.iter_upper() {
            let (r, c) = ordered(iperm[i], iperm[j]);
            col_count[c] += 1;
            let _ = r;
        }
        let mut c_col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            c_col_ptr[k + 1] = c_col_ptr[k] + col_count[k];
        }
        let mut cursor = c_col_ptr[..n].to_vec();
        let mut c_row_idx = vec![0usize; nnz];
        let mut a_to_c = vec![0usize; nnz];
        let mut diag_pos = vec![NONE; n];
        for (t, (i, j, _)) in a.iter_upper().enumerate() {
            let (r, c) = ordered(iperm[i], iperm[j]);
            let pos = cursor[c];
            cursor[c] += 1;
            c_row_idx[pos] = r;
            a_to_c[t] = pos;
            if r == c {
                diag_pos[r] = pos;
            }
        }
        debug_assert!(diag_pos.iter().all(|&p| p != NONE), "missing diagonal entry");

        // elimination tree (Liu's algorithm)
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for p in c_col_ptr[k]..c_col_ptr[k + 1] {
                let mut i = c_row_idx[p];
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
        }

        // column counts of L by a symbolic row-pattern pass
        let mut counts = vec![1usize; n]; // diagonal
        let mut visit = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut out = vec![0usize; n];
        for k in 0..n {
            let top = ereach(
                k, &c_col_ptr, &c_row_idx, &parent, &mut visit, k + 1, &mut stack, &mut out,
            );
            for &j in &out[top..n] {
                counts[j] += 1;
            }
        }
        let mut l_col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            l_col_ptr[k + 1] = l_col_ptr[k] + counts[k];
        }

        SymbolicFactor {
            n,
            perm,
            iperm,
            parent,
            c_col_ptr,
            c_row_idx,
            a_to_c,
            diag_pos,
            l_col_ptr,
            pattern_row_ptr: a.row_ptr().to_vec(),
            pattern_col_idx: a.col_idx().to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of structural nonzeros in the factor (including diagonal).
    pub fn factor_nnz(&self) -> usize {
        self.l_col_ptr[self.n]
    }

    /// Whether `a` has exactly the pattern this analysis was built for.
    pub fn matches_pattern(&self, a: &SparseSymMatrix) -> bool {
        a.row_ptr() == self.pattern_row_ptr.as_slice()
            && a.col_idx() == self.pattern_col_idx.as_slice()
    }

    /// Numeric factorization of a matrix with this symbolic structure,
    /// optionally adding `jitter` to the diagonal.
    pub fn factorize(&self, a: &SparseSymMatrix, jitter: f64) -> Result<CholeskyFactor> {
        if !self.matches_pattern(a) {
            return Err(Error::PatternMismatch);
        }
        let n = self.n;
        let mut c_values = vec![0.0f64; a.nnz_stored()];
        for (t, &v) in a.values().iter().enumerate() {
            c_values[self.a_to_c[t]] = v;
        }
        if jitter != 0.0 {
            for k in 0..n {
                c_values[self.diag_pos[k]] += jitter;
            }
        }

        let nnz_l = self.factor_nnz();
        let mut row_idx = vec![0usize; nnz_l];
        let mut values = vec![0.0f64; nnz_l];
        let mut col_next = self.l_col_ptr[..n].to_vec();

        let mut x = vec![0.0f64; n];
        let mut visit = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut pattern = vec![0usize; n];

        for k in 0..n {
            let top = ereach(
                k,
                &self.c_col_ptr,
                &self.c_row_idx,
                &self.parent,
                &mut visit,
                k + 1,
                &mut stack,
                &mut pattern,
            );
            // scatter column k of the permuted matrix (rows <= k)
            for p in self.c_col_ptr[k]..self.c_col_ptr[k + 1] {
                x[self.c_row_idx[p]] = c_values[p];
            }
            let mut d = x[k];
            x[k] = 0.0;
            // sparse triangular solve for row k of L, in elimination order
            for &j in &pattern[top..n] {
                let lkj = x[j] / values[self.l_col_ptr[j]];
                x[j] = 0.0;
                for p in self.l_col_ptr[j] + 1..col_next[j] {
                    x[row_idx[p]] -= values[p] * lkj;
                }
                d -= lkj * lkj;
                let slot = col_next[j];
                row_idx[slot] = k;
                values[slot] = lkj;
                col_next[j] += 1;
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: k, value: d });
            }
            let slot = col_next[k];
            row_idx[slot] = k;
            values[slot] = d.sqrt();
            col_next[k] += 1;
        }

        Ok(CholeskyFactor {
            n,
            perm: self.perm.clone(),
            iperm: self.iperm.clone(),
            parent: self.parent.clone(),
            col_ptr: self.l_col_ptr.clone(),
            row_idx,
            values,
        })
    }
}

#[inline]
fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Row pattern of row `k` of the factor: the union of elimination-tree
/// paths from the structural entries of column `k` up to `k`, returned in
/// `out[top..n]` in an order safe for the numeric solve.
#[allow(clippy::too_many_arguments)]
fn ereach(
    k: usize,
    c_col_ptr: &[usize],
    c_row_idx: &[usize],
    parent: &[usize],
    visit: &mut [usize],
    stamp: usize,
    stack: &mut [usize],
    out: &mut [usize],
) -> usize {
    let n = parent.len();
    let mut top = n;
    visit[k] = stamp;
    for p in c_col_ptr[k]..c_col_ptr[k + 1] {
        let mut i = c_row_idx[p];
        if i >= k {
            continue;
        }
        let mut len = 0usize;
        while visit[i] != stamp {
            stack[len] = i;
            len += 1;
            visit[i] = stamp;
            i = parent[i];
            if i == NONE {
                break;
            }
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            out[top] = stack[len];
        }
    }
    top
}

/// Sparse Cholesky factor: permutation plus the lower-triangular `L` stored
/// by column (diagonal first in each column), with `P R P' = L L'`, i.e.
/// `R(perm, perm) = Q' Q` for `Q = L'`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    perm: Vec<usize>,
    iperm: Vec<usize>,
    parent: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CholeskyFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Structural nonzeros of the factor, including the diagonal.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `log |R| = 2 sum(log diag(L))`; invariant under the permutation.
    pub fn logdet(&self) -> f64 {
        (0..self.n)
            .map(|j| self.values[self.col_ptr[j]].ln())
            .sum::<f64>()
            * 2.0
    }

    /// Solves `Q' W = B(perm, :)`, so that `W' W = B' R^{-1} B` exactly as
    /// if no permutation had been applied.
    pub fn solve_transposed(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(b.nrows(), self.n, "right-hand side has wrong row count");
        let mut w = DMatrix::zeros(self.n, b.ncols());
        let mut x = vec![0.0f64; self.n];
        for c in 0..b.ncols() {
            for j in 0..self.n {
                x[j] = b[(self.perm[j], c)];
            }
            self.forward_solve_dense(&mut x);
            for j in 0..self.n {
                w[(j, c)] = x[j];
            }
        }
        w
    }

    /// Single-vector version of [`CholeskyFactor::solve_transposed`].
    pub fn solve_transposed_vec(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<f64> = (0..self.n).map(|j| b[self.perm[j]]).collect();
        self.forward_solve_dense(&mut x);
        x
    }

    fn forward_solve_dense(&self, x: &mut [f64]) {
        for j in 0..self.n {
            let xj = x[j] / self.values[self.col_ptr[j]];
            x[j] = xj;
            if xj != 0.0 {
                for p in self.col_ptr[j] + 1..self.col_ptr[j + 1] {
                    x[self.row_idx[p]] -= self.values[p] * xj;
                }
            }
        }
    }

    /// Forward solve with a sparse right-hand side given as
    /// `(original index, value)` pairs, restricted to the elimination-tree
    /// reach of the support. The result stays in `ws` in permuted
    /// coordinates; combine it with other permuted vectors such as the
    /// columns of [`CholeskyFactor::solve_transposed`] output.
    pub fn sparse_forward_solve(&self, rhs: &[(usize, f64)], ws: &mut SolveWorkspace) {
        debug_assert_eq!(ws.x.len(), self.n);
        for &j in &ws.pattern {
            ws.x[j] = 0.0;
            ws.in_pattern[j] = false;
        }
        ws.pattern.clear();
        for &(orig, v) in rhs {
            let start = self.iperm[orig];
            ws.x[start] = v;
            let mut j = start;
            while j != NONE && !ws.in_pattern[j] {
                ws.in_pattern[j] = true;
                ws.pattern.push(j);
                j = self.parent[j];
            }
        }
        ws.pattern.sort_unstable();
        for idx in 0..ws.pattern.len() {
            let j = ws.pattern[idx];
            let xj = ws.x[j] / self.values[self.col_ptr[j]];
            ws.x[j] = xj;
            if xj != 0.0 {
                for p in self.col_ptr[j] + 1..self.col_ptr[j + 1] {
                    x_sub(&mut ws.x, self.row_idx[p], self.values[p] * xj);
                }
            }
        }
    }
}

#[inline]
fn x_sub(x: &mut [f64], i: usize, v: f64) {
    x[i] -= v;
}

/// Reusable buffers for [`CholeskyFactor::sparse_forward_solve`].
#[derive(Debug, Clone)]
pub struct SolveWorkspace {
    x: Vec<f64>,
    in_pattern: Vec<bool>,
    pattern: Vec<usize>,
}

impl SolveWorkspace {
    pub fn new(n: usize) -> Self {
        SolveWorkspace {
            x: vec![0.0; n],
            in_pattern: vec![false; n],
            pattern: Vec::new(),
        }
    }

    /// Permuted indices with (potentially) nonzero solution values,
    /// ascending.
    pub fn pattern(&self) -> &[usize] {
        &self.pattern
    }

    /// Solution value at a permuted index.
    #[inline]
    pub fn value(&self, j: usize) -> f64 {
        self.x[j]
    }

    /// Squared Euclidean norm of the solution.
    pub fn norm_squared(&self) -> f64 {
        self.pattern.iter().map(|&j| self.x[j] * self.x[j]).sum()
    }

    /// Dot product with a dense vector in permuted coordinates.
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.pattern.iter().map(|&j| self.x[j] * dense[j]).sum()
    }
}
