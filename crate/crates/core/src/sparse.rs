//! Compressed sparse row storage and the matrix–vector kernels used by every solver.
//!
//! Matrices are immutable once built. Construction sums duplicate entries, sorts
//! each row by column and drops entries that are exactly zero; arithmetic never
//! prunes afterwards, so `nnz` is fixed for the lifetime of a matrix.

use crate::dense::DenseMatrix;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a CSR matrix from `(row, col, value)` triplets.
    ///
    /// Duplicates are summed; entries whose sum is exactly zero are not stored.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(row, col, _) in entries {
            if row >= nrows || col >= ncols {
                return Err(Error::IndexOutOfRange { row, col, nrows, ncols });
            }
            counts[row + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }

        // bucket by row, then sort and merge each row
        let mut next = counts.clone();
        let mut cols = vec![0usize; entries.len()];
        let mut vals = vec![0.0; entries.len()];
        for &(row, col, value) in entries {
            let k = next[row];
            cols[k] = col;
            vals[k] = value;
            next[row] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < scratch.len() {
                let col = scratch[k].0;
                let mut sum = 0.0;
                while k < scratch.len() && scratch[k].0 == col {
                    sum += scratch[k].1;
                    k += 1;
                }
                if sum != 0.0 {
                    col_idx.push(col);
                    values.push(sum);
                }
            }
            row_ptr.push(col_idx.len());
        }

        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

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
        Self::scaled_eye(n, n, 1.0)
    }

    /// `value * eye(nrows, ncols)`: ones at `(i, i)` for `i < min(nrows, ncols)`.
    pub fn scaled_eye(nrows: usize, ncols: usize, value: f64) -> Self {
        let k = nrows.min(ncols);
        let entries: Vec<_> = (0..k).map(|i| (i, i, value)).collect();
        Self::from_triplets(nrows, ncols, &entries).expect("diagonal indices are in range")
    }

    /// Converts a dense matrix, skipping exact zeros.
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut row_ptr = Vec::with_capacity(m.nrows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..m.nrows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows: m.nrows(),
            ncols: m.ncols(),
            row_ptr,
            col_idx,
            values,
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

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    /// Stored entries as `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let entries: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &entries).expect("transposed indices are in range")
    }

    /// `A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("spmv", self.ncols, x.len())?;
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without allocation. Lengths are the caller's responsibility.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut sum = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                sum += self.values[k] * x[self.col_idx[k]];
            }
            *yi = sum;
        }
    }

    /// `y += alpha A x`.
    pub fn spmv_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut sum = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                sum += self.values[k] * x[self.col_idx[k]];
            }
            *yi += alpha * sum;
        }
    }

    /// `Aᵀ y`.
    pub fn spmv_t(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("spmv_t", self.nrows, y.len())?;
        let mut out = vec![0.0; self.ncols];
        self.spmv_t_add(1.0, y, &mut out);
        Ok(out)
    }

    /// `out += alpha Aᵀ y`, scattering row by row.
    pub fn spmv_t_add(&self, alpha: f64, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.nrows);
        debug_assert_eq!(out.len(), self.ncols);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            let s = alpha * yi;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.col_idx[k]] += self.values[k] * s;
            }
        }
    }
}

/// Dense `S = A1ᵀA1 − A2ᵀA2`, symmetrized as `(S + Sᵀ)/2` so it is bitwise symmetric.
pub fn gram_diff(a1: &SparseMatrix, a2: &SparseMatrix) -> Result<DenseMatrix> {
    check_len("gram_diff", a1.ncols(), a2.ncols())?;
    let n = a1.ncols();
    let mut s = DenseMatrix::zeros(n, n);
    accumulate_gram(&mut s, a1, 1.0);
    accumulate_gram(&mut s, a2, -1.0);
    s.symmetrize();
    Ok(s)
}

/// Dense `A1ᵀA1`.
pub fn gram(a: &SparseMatrix) -> DenseMatrix {
    let n = a.ncols();
    let mut s = DenseMatrix::zeros(n, n);
    accumulate_gram(&mut s, a, 1.0);
    s.symmetrize();
    s
}

// Row outer products: S += sign * Σ_i a_iᵀ a_i. Only the upper triangle is
// accumulated and then mirrored.
fn accumulate_gram(s: &mut DenseMatrix, a: &SparseMatrix, sign: f64) {
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (k, (&j, &vj)) in cols.iter().zip(vals).enumerate() {
            let w = sign * vj;
            let row = s.row_mut(j);
            for (&l, &vl) in cols[k..].iter().zip(&vals[k..]) {
                row[l] += w * vl;
            }
        }
    }
    let n = s.nrows();
    for j in 0..n {
        for l in (j + 1)..n {
            let v = s[(j, l)];
            s[(l, j)] = v;
        }
    }
}
