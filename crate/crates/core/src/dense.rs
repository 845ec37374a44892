//! Dense row-major matrices and the factorizations the solvers need.
//!
//! * Cholesky for the inner `n×n` solves of the block preconditioners.
//! * Householder QR, used only to draw random orthogonal matrices.
//! * Cyclic Jacobi for full symmetric spectra (and from it the smallest singular value).
//! * Hessenberg reduction + Francis double-shift QR for spectra of unsymmetric
//!   matrices at desk scale (spectrum plots of the unpreconditioned systems).

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Row-major data of length `nrows * ncols`.
    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("DenseMatrix::from_row_major", nrows * ncols, data.len())?;
        Ok(Self { nrows, ncols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for r in rows {
            check_len("DenseMatrix::from_rows", ncols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self {
            nrows: rows.len(),
            ncols,
            data,
        })
    }

    /// Builds a matrix entrywise from `f(i, j)`.
    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                data.push(f(i, j));
            }
        }
        Self { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for (j, &v) in self.row(i).iter().enumerate() {
                t[(j, i)] = v;
            }
        }
        t
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("DenseMatrix::mul_vec", self.ncols, x.len())?;
        Ok((0..self.nrows).map(|i| crate::vector::dot(self.row(i), x)).collect())
    }

    /// `selfᵀ x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("DenseMatrix::tr_mul_vec", self.nrows, x.len())?;
        let mut out = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            crate::vector::axpy(xi, self.row(i), &mut out);
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_len("DenseMatrix::matmul", self.ncols, other.nrows)?;
        let mut out = Self::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            let orow = &mut out.data[i * other.ncols..(i + 1) * other.ncols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    crate::vector::axpy(a, other.row(k), orow);
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ self`, bitwise symmetric.
    pub fn gram(&self) -> DenseMatrix {
        let n = self.ncols;
        let mut g = Self::zeros(n, n);
        for i in 0..self.nrows {
            let r = self.row(i);
            for (j, &rj) in r.iter().enumerate() {
                if rj == 0.0 {
                    continue;
                }
                crate::vector::axpy(rj, &r[j..], &mut g.data[j * n + j..(j + 1) * n]);
            }
        }
        for j in 0..n {
            for l in (j + 1)..n {
                g.data[l * n + j] = g.data[j * n + l];
            }
        }
        g
    }

    /// Adds `shift` to every diagonal entry.
    pub fn shift_diagonal(&mut self, shift: f64) {
        for i in 0..self.nrows.min(self.ncols) {
            self[(i, i)] += shift;
        }
    }

    /// Replaces the matrix by `(M + Mᵀ)/2`. Square matrices only.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square(), "symmetrize needs a square matrix");
        let n = self.nrows;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = v;
                self.data[j * n + i] = v;
            }
        }
    }

    /// Horizontal concatenation `[self, col]`.
    pub fn append_column(&self, col: &[f64]) -> Result<DenseMatrix> {
        check_len("DenseMatrix::append_column", self.nrows, col.len())?;
        Ok(Self::from_fn(self.nrows, self.ncols + 1, |i, j| {
            if j < self.ncols {
                self[(i, j)]
            } else {
                col[i]
            }
        }))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[i * self.ncols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[i * self.ncols + j]
    }
}

/// Pivots at or below this fraction of the largest diagonal entry fail the factorization.
pub const CHOLESKY_PIVOT_TOL: f64 = 1e-14;

/// Lower-triangular Cholesky factor `L` with `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: DenseMatrix,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &DenseMatrix {
        &self.l
    }

    /// Solves `M z = r`.
    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("chol_solve", self.dim(), r.len())?;
        let mut z = r.to_vec();
        self.solve_in_place(&mut z);
        Ok(z)
    }

    /// Overwrites `b` with `M⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        // L y = b
        for i in 0..n {
            let row = self.l.row(i);
            let s = crate::vector::dot(&row[..i], &b[..i]);
            b[i] = (b[i] - s) / row[i];
        }
        // Lᵀ z = y, column sweep so that L is read by rows
        for i in (0..n).rev() {
            let row = self.l.row(i);
            b[i] /= row[i];
            let zi = b[i];
            for (bk, &lik) in b[..i].iter_mut().zip(&row[..i]) {
                *bk -= lik * zi;
            }
        }
    }
}

/// Cholesky factorization of a symmetric matrix (only the lower triangle is read).
pub fn cholesky(m: &DenseMatrix) -> Result<CholeskyFactor> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "cholesky",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let n = m.nrows();
    let max_diag = m.diagonal().into_iter().fold(0.0_f64, f64::max);
    let tol = CHOLESKY_PIVOT_TOL * max_diag;
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let (head, tail) = l.data.split_at_mut(i * n);
        let li = &mut tail[..n];
        for j in 0..i {
            let lj = &head[j * n..(j + 1) * n];
            let s = crate::vector::dot(&li[..j], &lj[..j]);
            li[j] = (m[(i, j)] - s) / lj[j];
        }
        let d = m[(i, i)] - crate::vector::dot(&li[..i], &li[..i]);
        if d.is_nan() || d <= tol || d.is_infinite() {
            return Err(Error::NotSpd { index: i, pivot: d });
        }
        li[i] = d.sqrt();
    }
    Ok(CholeskyFactor { l })
}

/// Orthogonal factor `Q` of `G = QR` via Householder reflections, with the
/// column signs chosen so that `R` has a positive diagonal (so `G = I` gives `Q = I`).
///
/// Fails with [`Error::RankDeficient`] when a column is numerically dependent on the
/// previous ones; callers drawing random matrices simply draw again.
pub fn householder_qr_orthogonal(g: &DenseMatrix) -> Result<DenseMatrix> {
    if !g.is_square() {
        return Err(Error::DimensionMismatch {
            context: "householder_qr_orthogonal",
            expected: g.nrows(),
            found: g.ncols(),
        });
    }
    let n = g.nrows();
    let tiny = (n as f64) * f64::EPSILON * g.frobenius_norm();
    // work on Gᵀ so that columns of G are contiguous rows
    let mut w = g.transpose();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut signs = vec![1.0; n];

    for (j, sign) in signs.iter_mut().enumerate() {
        let x = &w.row(j)[j..];
        let norm = crate::vector::norm2(x);
        if norm.is_nan() || norm <= tiny {
            return Err(Error::RankDeficient);
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vv = crate::vector::dot(&v, &v);
        // R_jj = alpha
        *sign = alpha.signum();
        for k in (j + 1)..n {
            let col = &mut w.row_mut(k)[j..];
            let f = 2.0 * crate::vector::dot(&v, col) / vv;
            crate::vector::axpy(-f, &v, col);
        }
        let vnorm = vv.sqrt();
        crate::vector::scale(1.0 / vnorm, &mut v);
        reflectors.push(v);
    }

    // Q = H_0 H_1 ... H_{n-1}, built row by row: e_kᵀ H_0 H_1 ...
    let mut q = DenseMatrix::identity(n);
    for k in 0..n {
        let row = q.row_mut(k);
        for (j, v) in reflectors.iter().enumerate() {
            let seg = &mut row[j..];
            let f = 2.0 * crate::vector::dot(v, seg);
            crate::vector::axpy(-f, v, seg);
        }
    }
    for k in 0..n {
        for (rj, sj) in q.row_mut(k).iter_mut().zip(&signs) {
            *rj *= sj;
        }
    }
    Ok(q)
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the unit eigenvector of `eigenvalues[i]`.
    pub eigenvectors: DenseMatrix,
}

pub const JACOBI_MAX_SWEEPS: usize = 100;
pub const JACOBI_REL_TOL: f64 = 1e-12;

/// Full symmetric eigendecomposition by cyclic Jacobi.
pub fn jacobi_eigen(m: &DenseMatrix) -> Result<SymEigen> {
    let (values, vectors) = jacobi(m, true)?;
    let vt = vectors.expect("vectors requested");
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let eigenvalues = order.iter().map(|&k| values[k]).collect();
    // vt row k is the eigenvector of values[k]
    let eigenvectors = DenseMatrix::from_fn(n, n, |i, j| vt[(order[j], i)]);
    Ok(SymEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only (ascending); skips accumulating the rotations.
pub fn jacobi_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>> {
    let (mut values, _) = jacobi(m, false)?;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

// Cyclic Jacobi in round-robin (tournament) order: each round rotates n/2
// disjoint pairs (p, q) at once. With J the product of the round's rotations,
// A ← JᵀAJ is applied as a row pass (JᵀA), an in-place transpose and a second row
// pass, so every update streams over contiguous rows. Rotations are accumulated
// into the rows of Vᵀ. Stops once the off-diagonal Frobenius norm is below
// JACOBI_REL_TOL·‖M‖_F.
fn jacobi(m: &DenseMatrix, want_vectors: bool) -> Result<(Vec<f64>, Option<DenseMatrix>)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "jacobi_eigen",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if !m.all_finite() {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let n = m.nrows();
    let mut a = m.clone();
    let mut vt = want_vectors.then(|| DenseMatrix::identity(n));
    let tol = JACOBI_REL_TOL * m.frobenius_norm();

    // circle method; an odd order gets a dummy player `n` that sits out
    let players = n + n % 2;
    let mut ring: Vec<usize> = (0..players).collect();
    let mut rotations: Vec<(usize, usize, f64, f64)> = Vec::with_capacity(players / 2);

    let mut converged = false;
    for sweep in 0..=JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(&a);
        if off <= tol {
            converged = true;
            break;
        }
        if sweep == JACOBI_MAX_SWEEPS || n < 2 {
            break;
        }
        // threshold pass in the first sweeps skips small entries
        let threshold = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };
        for _round in 0..players - 1 {
            rotations.clear();
            for i in 0..players / 2 {
                let (x, y) = (ring[i], ring[players - 1 - i]);
                if x >= n || y >= n {
                    continue;
                }
                let (p, q) = if x < y { (x, y) } else { (y, x) };
                let apq = a.data[p * n + q];
                if apq == 0.0 || apq.abs() <= threshold {
                    continue;
                }
                let app = a.data[p * n + p];
                let aqq = a.data[q * n + q];
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a.data[p * n + q] = 0.0;
                    a.data[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                rotations.push((p, q, c, t * c));
            }
            ring[1..].rotate_right(1);
            if rotations.is_empty() {
                continue;
            }

            // exact diagonal updates from the pre-rotation 2x2 blocks
            let diag: Vec<(f64, f64)> = rotations
                .iter()
                .map(|&(p, q, c, s)| {
                    let t = s / c;
                    let apq = a.data[p * n + q];
                    (a.data[p * n + p] - t * apq, a.data[q * n + q] + t * apq)
                })
                .collect();
            for &(p, q, c, s) in &rotations {
                rotate_rows(&mut a.data, n, p, q, c, s);
            }
            transpose_in_place(&mut a.data, n);
            for &(p, q, c, s) in &rotations {
                rotate_rows(&mut a.data, n, p, q, c, s);
            }
            for (&(p, q, _, _), &(dp, dq)) in rotations.iter().zip(&diag) {
                a.data[p * n + p] = dp;
                a.data[q * n + q] = dq;
                a.data[p * n + q] = 0.0;
                a.data[q * n + p] = 0.0;
            }
            if let Some(vt) = vt.as_mut() {
                for &(p, q, c, s) in &rotations {
                    rotate_rows(&mut vt.data, n, p, q, c, s);
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            algorithm: "Jacobi eigensolver",
            iterations: JACOBI_MAX_SWEEPS,
        });
    }
    Ok((a.diagonal(), vt))
}

fn transpose_in_place(data: &mut [f64], n: usize) {
    const B: usize = 32;
    for ib in (0..n).step_by(B) {
        for jb in (ib..n).step_by(B) {
            for i in ib..(ib + B).min(n) {
                let j0 = if ib == jb { i + 1 } else { jb };
                for j in j0..(jb + B).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

// row_p ← c·row_p − s·row_q, row_q ← s·row_p + c·row_q
fn rotate_rows(data: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    debug_assert!(p < q);
    let (head, tail) = data.split_at_mut(q * n);
    let rp = &mut head[p * n..(p + 1) * n];
    let rq = &mut tail[..n];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

fn off_diagonal_norm(a: &DenseMatrix) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for (j, &v) in a.row(i).iter().enumerate() {
            if i != j {
                sum += v * v;
            }
        }
    }
    sum.sqrt()
}

/// Smallest singular value of a tall matrix, as `√λ_min(MᵀM)` (clamped at zero).
pub fn smallest_singular_value(m: &DenseMatrix) -> Result<f64> {
    if m.nrows() < m.ncols() {
        return Err(Error::InvalidParameter(format!(
            "smallest_singular_value needs nrows >= ncols, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let lambda = jacobi_eigenvalues(&m.gram())?;
    Ok(lambda.first().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// All eigenvalues of a general real square matrix (no particular order).
///
/// Householder reduction to upper Hessenberg form followed by the Francis
/// double-shift QR iteration with deflation on small subdiagonals.
pub fn eigenvalues_general(m: &DenseMatrix) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "eigenvalues_general",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if !m.all_finite() {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let mut h = m.clone();
    hessenberg(&mut h);
    hessenberg_qr(h)
}

fn hessenberg(h: &mut DenseMatrix) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    let mut u = vec![0.0; n];
    for k in 0..n - 2 {
        let scale: f64 = ((k + 1)..n).map(|i| h[(i, k)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut sigma = 0.0;
        for i in (k + 1)..n {
            u[i] = h[(i, k)] / scale;
            sigma += u[i] * u[i];
        }
        let mut g = sigma.sqrt();
        if u[k + 1] > 0.0 {
            g = -g;
        }
        let hh = sigma - u[k + 1] * g;
        u[k + 1] -= g;

        // H ← (I − u uᵀ/hh) H
        for j in k..n {
            let f: f64 = ((k + 1)..n).map(|i| u[i] * h[(i, j)]).sum::<f64>() / hh;
            for i in (k + 1)..n {
                h[(i, j)] -= f * u[i];
            }
        }
        // H ← H (I − u uᵀ/hh)
        for i in 0..n {
            let row = h.row_mut(i);
            let f: f64 = ((k + 1)..n).map(|j| u[j] * row[j]).sum::<f64>() / hh;
            for j in (k + 1)..n {
                row[j] -= f * u[j];
            }
        }
        h[(k + 1, k)] = scale * g;
        for i in (k + 2)..n {
            h[(i, k)] = 0.0;
        }
    }
}

// Eigenvalue-only Hessenberg QR (EISPACK hqr scheme): deflate from the bottom,
// resolve 1x1 and 2x2 trailing blocks, otherwise perform a Francis double step on
// the active window with exceptional shifts at iterations 10 and 30.
fn hessenberg_qr(mut h: DenseMatrix) -> Result<Vec<Complex64>> {
    let n = h.nrows();
    let mut eig = vec![Complex64::new(0.0, 0.0); n];
    if n == 0 {
        return Ok(eig);
    }
    let eps = f64::EPSILON;
    let norm: f64 = (0..n)
        .map(|i| (i.saturating_sub(1)..n).map(|j| h[(i, j)].abs()).sum::<f64>())
        .sum();
    let max_iter = 60 * n.max(10);

    let mut hi = n as isize - 1;
    let mut exshift = 0.0;
    let mut iter = 0usize;
    let mut total = 0usize;

    while hi >= 0 {
        let nn = hi as usize;
        // find small subdiagonal
        let mut l = nn;
        while l > 0 {
            let mut s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == nn {
            eig[nn] = Complex64::new(h[(nn, nn)] + exshift, 0.0);
            hi -= 1;
            iter = 0;
            continue;
        }
        if l + 1 == nn {
            let w = h[(nn, nn - 1)] * h[(nn - 1, nn)];
            let p = 0.5 * (h[(nn - 1, nn - 1)] - h[(nn, nn)]);
            let q = p * p + w;
            let z = q.abs().sqrt();
            let x = h[(nn, nn)] + exshift;
            if q >= 0.0 {
                let z = if p >= 0.0 { p + z } else { p - z };
                let a = x + z;
                let b = if z != 0.0 { x - w / z } else { a };
                eig[nn - 1] = Complex64::new(a, 0.0);
                eig[nn] = Complex64::new(b, 0.0);
            } else {
                eig[nn - 1] = Complex64::new(x + p, z);
                eig[nn] = Complex64::new(x + p, -z);
            }
            hi -= 2;
            iter = 0;
            continue;
        }

        total += 1;
        if total > max_iter {
            return Err(Error::NoConvergence {
                algorithm: "Hessenberg QR",
                iterations: max_iter,
            });
        }

        // shifts
        let mut x = h[(nn, nn)];
        let mut y = h[(nn - 1, nn - 1)];
        let mut w = h[(nn, nn - 1)] * h[(nn - 1, nn)];
        if iter == 10 {
            exshift += x;
            for i in 0..=nn {
                h[(i, i)] -= x;
            }
            let s = h[(nn, nn - 1)].abs() + h[(nn - 1, nn - 2)].abs();
            x = 0.75 * s;
            y = x;
            w = -0.4375 * s * s;
        }
        if iter == 30 {
            let mut s = 0.5 * (y - x);
            s = s * s + w;
            if s > 0.0 {
                s = s.sqrt();
                if y < x {
                    s = -s;
                }
                s = x - w / (0.5 * (y - x) + s);
                for i in 0..=nn {
                    h[(i, i)] -= s;
                }
                exshift += s;
                x = 0.964;
                y = x;
                w = x;
            }
        }
        iter += 1;

        // look for two consecutive small subdiagonals
        let mut m = nn - 2;
        let (mut p, mut q, mut r);
        loop {
            let z = h[(m, m)];
            let rr = x - z;
            let ss = y - z;
            p = (rr * ss - w) / h[(m + 1, m)] + h[(m, m + 1)];
            q = h[(m + 1, m + 1)] - z - rr - ss;
            r = h[(m + 2, m + 1)];
            let s = p.abs() + q.abs() + r.abs();
            p /= s;
            q /= s;
            r /= s;
            if m == l {
                break;
            }
            let lhs = h[(m, m - 1)].abs() * (q.abs() + r.abs());
            let rhs = eps * p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs());
            if lhs < rhs {
                break;
            }
            m -= 1;
        }
        for i in (m + 2)..=nn {
            h[(i, i - 2)] = 0.0;
            if i > m + 2 {
                h[(i, i - 3)] = 0.0;
            }
        }

        // double QR step on rows l..=nn, columns m..=nn
        for k in m..nn {
            let notlast = k != nn - 1;
            let mut xk = 0.0;
            if k != m {
                p = h[(k, k - 1)];
                q = h[(k + 1, k - 1)];
                r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                xk = p.abs() + q.abs() + r.abs();
                if xk == 0.0 {
                    continue;
                }
                p /= xk;
                q /= xk;
                r /= xk;
            }
            let mut s = (p * p + q * q + r * r).sqrt();
            if p < 0.0 {
                s = -s;
            }
            if s == 0.0 {
                continue;
            }
            if k != m {
                h[(k, k - 1)] = -s * xk;
            } else if l != m {
                h[(k, k - 1)] = -h[(k, k - 1)];
            }
            p += s;
            let xx = p / s;
            let yy = q / s;
            let zz = r / s;
            q /= p;
            r /= p;

            for j in k..n {
                let mut pp = h[(k, j)] + q * h[(k + 1, j)];
                if notlast {
                    pp += r * h[(k + 2, j)];
                    h[(k + 2, j)] -= pp * zz;
                }
                h[(k, j)] -= pp * xx;
                h[(k + 1, j)] -= pp * yy;
            }
            for i in 0..=nn.min(k + 3) {
                let mut pp = xx * h[(i, k)] + yy * h[(i, k + 1)];
                if notlast {
                    pp += zz * h[(i, k + 2)];
                    h[(i, k + 2)] -= pp * r;
                }
                h[(i, k)] -= pp;
                h[(i, k + 1)] -= pp * q;
            }
        }
    }
    Ok(eig)
}
