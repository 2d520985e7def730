//! Compressed sparse row matrices and a banded Cholesky factorization.
//!
//! Only the handful of kernels the solvers need are provided: products with
//! vectors, transposition, sparse-sparse products (for Galerkin triple
//! products), linear combinations and block replication across fields.

use std::fmt::Write as _;

/// Real sparse matrix in CSR format with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            let p = next[i];
            cols[p] = j;
            vals[p] = v;
            next[i] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|p| (cols[p], vals[p])));
            scratch.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < scratch.len() {
                let j = scratch[k].0;
                let mut v = 0.0;
                while k < scratch.len() && scratch[k].0 == j {
                    v += scratch[k].1;
                    k += 1;
                }
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Zero matrix with an explicit sparsity pattern given per row.
    pub fn from_pattern(nrows: usize, ncols: usize, rows: &[Vec<usize>]) -> Self {
        assert_eq!(rows.len(), nrows);
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in rows {
            let mut r = row.clone();
            r.sort_unstable();
            r.dedup();
            debug_assert!(r.iter().all(|&j| j < ncols));
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
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

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Storage index of entry `(i, j)`, if it is part of the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.col_idx[start..self.row_ptr[i + 1]]
            .binary_search(&j)
            .ok()
            .map(|k| start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn fill_zero(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matrix-vector dimension mismatch");
        assert_eq!(y.len(), self.nrows, "matrix-vector output mismatch");
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[p] * x[self.col_idx[p]];
            }
            *yi = acc;
        }
    }

    /// `Aᵀ x` without forming the transpose.
    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "transpose product dimension mismatch");
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[p]] += self.values[p] * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in increasing order, so the transposed rows come out sorted.
        for i in 0..self.nrows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                let q = next[j];
                col_idx[q] = i;
                values[q] = self.values[p];
                next[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    /// Sparse product `self * other` (Gustavson's row-by-row algorithm).
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows, "matmul dimension mismatch");
        let n = other.ncols;
        let mut acc = vec![0.0; n];
        let mut marker = vec![usize::MAX; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.nrows {
            touched.clear();
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let k = self.col_idx[p];
                let a = self.values[p];
                for q in other.row_ptr[k]..other.row_ptr[k + 1] {
                    let j = other.col_idx[q];
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * other.values[q];
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                values.push(acc[j]);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `self + alpha * other` on the union of both patterns.
    pub fn add_scaled(&self, other: &CsrMatrix, alpha: f64) -> CsrMatrix {
        assert_eq!(self.nrows, other.nrows, "add dimension mismatch");
        assert_eq!(self.ncols, other.ncols, "add dimension mismatch");
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(self.nnz().max(other.nnz()));
        row_ptr.push(0);
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut a, mut b) = (0, 0);
            while a < ca.len() || b < cb.len() {
                let ja = ca.get(a).copied().unwrap_or(usize::MAX);
                let jb = cb.get(b).copied().unwrap_or(usize::MAX);
                if ja == jb {
                    col_idx.push(ja);
                    values.push(va[a] + alpha * vb[b]);
                    a += 1;
                    b += 1;
                } else if ja < jb {
                    col_idx.push(ja);
                    values.push(va[a]);
                    a += 1;
                } else {
                    col_idx.push(jb);
                    values.push(alpha * vb[b]);
                    b += 1;
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Replicates a scalar operator block-diagonally over `fields` interleaved
    /// components: entry `(i, j)` becomes `(i*fields + f, j*fields + f)`.
    pub fn expand_fields(&self, fields: usize) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(self.nrows * fields + 1);
        let mut col_idx = Vec::with_capacity(self.nnz() * fields);
        let mut values = Vec::with_capacity(self.nnz() * fields);
        row_ptr.push(0);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for f in 0..fields {
                for (&j, &v) in cols.iter().zip(vals) {
                    col_idx.push(j * fields + f);
                    values.push(v);
                }
                row_ptr.push(col_idx.len());
            }
        }
        CsrMatrix {
            nrows: self.nrows * fields,
            ncols: self.ncols * fields,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Largest absolute entrywise difference between two matrices of equal shape.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        self.add_scaled(other, -1.0)
            .values
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Half-bandwidth `max |i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for i in 0..self.nrows {
            let (cols, _) = self.row(i);
            if let (Some(&first), Some(&last)) = (cols.first(), cols.last()) {
                bw = bw.max(i.saturating_sub(first)).max(last.saturating_sub(i));
            }
        }
        bw
    }

    /// Reverse Cuthill–McKee ordering of a structurally symmetric matrix:
    /// `perm[new] = old`. Each connected component starts from a node of
    /// minimum degree.
    pub fn reverse_cuthill_mckee(&self) -> Vec<usize> {
        let n = self.nrows;
        let degree: Vec<usize> = (0..n).map(|i| self.row(i).0.len()).collect();
        let mut by_degree: Vec<usize> = (0..n).collect();
        by_degree.sort_by_key(|&i| degree[i]);
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut neighbours = Vec::new();
        for &root in &by_degree {
            if visited[root] {
                continue;
            }
            visited[root] = true;
            let mut head = order.len();
            order.push(root);
            while head < order.len() {
                let i = order[head];
                head += 1;
                neighbours.clear();
                neighbours.extend(self.row(i).0.iter().copied().filter(|&j| !visited[j]));
                neighbours.sort_by_key(|&j| degree[j]);
                for &j in &neighbours {
                    visited[j] = true;
                    order.push(j);
                }
            }
        }
        order.reverse();
        order
    }

    /// `B = A(perm, perm)`, i.e. `B[i][j] = A[perm[i]][perm[j]]`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> CsrMatrix {
        let n = self.nrows;
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        let mut entries = Vec::new();
        for &old in perm {
            let (cols, vals) = self.row(old);
            entries.clear();
            entries.extend(cols.iter().map(|&j| inverse[j]).zip(vals.iter().copied()));
            entries.sort_unstable_by_key(|e| e.0);
            for &(j, v) in &entries {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in dense.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        dense
    }

    /// Matrix-market style coordinate dump (1-based indices), for debugging.
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::new();
        out.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
            }
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Cholesky factorization `A = L Lᵀ` of a symmetric positive definite band
/// matrix, stored row-wise as the lower band.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    // l[i * (bw + 1) + (j + bw - i)] = L[i][j] for i - bw <= j <= i
    l: Vec<f64>,
}

impl BandedCholesky {
    /// Factors the symmetric matrix given by its lower band. Returns `None`
    /// when a non-positive pivot shows up (matrix not positive definite).
    pub fn factor_band(n: usize, bw: usize, band: Vec<f64>) -> Option<Self> {
        Self::factor_or_direction(n, bw, band).ok()
    }

    /// Like [`factor_band`](Self::factor_band), but on failure returns a
    /// vector `v` with `vᵀAv ≤ 0` (zero outside the leading block that was
    /// factored up to the failing pivot).
    pub fn factor_or_direction(n: usize, bw: usize, mut band: Vec<f64>) -> std::result::Result<Self, Vec<f64>> {
        let w = bw + 1;
        assert_eq!(band.len(), n * w);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = band[i * w + (j + bw - i)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                if j == i {
                    if !(s > 0.0) || !s.is_finite() {
                        // Row i of L holds L11⁻¹a; v = [−L11⁻ᵀ L11⁻¹ a; 1] has
                        // vᵀAv equal to the non-positive Schur complement s.
                        let mut v = vec![0.0; n];
                        v[i] = 1.0;
                        for k in j0..i {
                            v[k] = -band[i * w + (k + bw - i)];
                        }
                        for k in (0..i).rev() {
                            let mut t = v[k];
                            for m in (k + 1)..(k + bw + 1).min(i) {
                                t -= band[m * w + (k + bw - m)] * v[m];
                            }
                            v[k] = t / band[k * w + bw];
                        }
                        return Err(v);
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (j + bw - i)] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, l: band })
    }

    /// Factors `A + E` in one pass, with `E` a non-negative diagonal chosen on
    /// the fly: a pivot below `delta` is replaced by `max(|pivot|, delta)`.
    /// Returns the factor and whether any pivot was modified.
    pub fn factor_modified(n: usize, bw: usize, mut band: Vec<f64>, delta: f64) -> (Self, bool) {
        let w = bw + 1;
        assert_eq!(band.len(), n * w);
        let mut modified = false;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = band[i * w + (j + bw - i)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                if j == i {
                    if !(s >= delta) {
                        modified = true;
                        s = if s.is_finite() { s.abs().max(delta) } else { delta };
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (j + bw - i)] = s / band[j * w + bw];
                }
            }
        }
        (Self { n, bw, l: band }, modified)
    }

    /// Extracts the lower band of `a` restricted to `free` rows/columns; rows
    /// and columns not in `free` are replaced by the identity. `shift` is added
    /// to every free diagonal entry.
    pub fn band_from_csr(a: &CsrMatrix, free: &[bool], shift: f64) -> (usize, Vec<f64>) {
        let n = a.nrows();
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            if !free[i] {
                band[i * w + bw] = 1.0;
                continue;
            }
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i && free[j] {
                    band[i * w + (j + bw - i)] = v;
                }
            }
            band[i * w + bw] += shift;
        }
        (bw, band)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (k + bw - i)] * y[k];
            }
            y[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..(i + bw + 1).min(n) {
                s -= self.l[k * w + (i + bw - k)] * y[k];
            }
            y[i] = s / self.l[i * w + bw];
        }
        y
    }
}
