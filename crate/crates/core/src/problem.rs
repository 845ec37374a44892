//! Indefinite least squares instances and their block three-by-three systems.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::Serialize;

use crate::dense::{cholesky, jacobi_eigenvalues, DenseMatrix};
use crate::error::{check_len, Error, Result};
use crate::sparse::{gram, gram_diff, SparseMatrix};
use crate::vector::{all_finite, norm2, sub};

/// Partitioned ILS instance `min ‖b1 − A1x‖² − ‖b2 − A2x‖²`.
///
/// Built through [`IlsProblem::new`] the instance is guaranteed to have `A1` of full
/// column rank and `S = A1ᵀA1 − A2ᵀA2` positive definite.
#[derive(Debug, Clone)]
pub struct IlsProblem {
    a1: SparseMatrix,
    a2: SparseMatrix,
    b1: Vec<f64>,
    b2: Vec<f64>,
    s: OnceLock<DenseMatrix>,
}

impl IlsProblem {
    /// Checked constructor: dimensions, finiteness, rank of `A1` and definiteness of `S`.
    pub fn new(a1: SparseMatrix, a2: SparseMatrix, b1: Vec<f64>, b2: Vec<f64>) -> Result<Self> {
        let prob = Self::from_parts(a1, a2, b1, b2)?;
        cholesky(&gram(&prob.a1)).map_err(|_| Error::Validation("A1 is not of full column rank".into()))?;
        cholesky(prob.s()).map_err(|e| match e {
            Error::NotSpd { index, pivot } => Error::Validation(format!(
                "S = A1ᵀA1 − A2ᵀA2 is not positive definite (pivot {index} = {pivot:e})"
            )),
            other => other,
        })?;
        Ok(prob)
    }

    /// Dimension and finiteness checks only; `S` may be indefinite.
    /// Use [`validate`] to inspect such an instance.
    pub fn from_parts(a1: SparseMatrix, a2: SparseMatrix, b1: Vec<f64>, b2: Vec<f64>) -> Result<Self> {
        let (p, n, q) = (a1.nrows(), a1.ncols(), a2.nrows());
        if p == 0 || n == 0 {
            return Err(Error::Validation(format!("A1 must be nonempty, got {p}x{n}")));
        }
        if p + q < n {
            return Err(Error::Validation(format!(
                "underdetermined partition: p + q = {} < n = {n}",
                p + q
            )));
        }
        check_len("A2 columns", n, a2.ncols())?;
        check_len("b1 length", p, b1.len())?;
        check_len("b2 length", q, b2.len())?;
        let finite = a1.values().iter().chain(a2.values()).all(|v| v.is_finite());
        if !finite || !all_finite(&b1) || !all_finite(&b2) {
            return Err(Error::Validation("non-finite entries in problem data".into()));
        }
        Ok(Self {
            a1,
            a2,
            b1,
            b2,
            s: OnceLock::new(),
        })
    }

    pub fn p(&self) -> usize {
        self.a1.nrows()
    }

    pub fn q(&self) -> usize {
        self.a2.nrows()
    }

    pub fn n(&self) -> usize {
        self.a1.ncols()
    }

    /// Order of either block system, `p + n + q`.
    pub fn dim(&self) -> usize {
        self.p() + self.n() + self.q()
    }

    pub fn a1(&self) -> &SparseMatrix {
        &self.a1
    }

    pub fn a2(&self) -> &SparseMatrix {
        &self.a2
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    /// `S = A1ᵀA1 − A2ᵀA2`, formed on first use.
    pub fn s(&self) -> &DenseMatrix {
        self.s
            .get_or_init(|| gram_diff(&self.a1, &self.a2).expect("column counts checked at construction"))
    }

    /// Right-hand side of the normal equation, `A1ᵀb1 − A2ᵀb2`.
    pub fn normal_rhs(&self) -> Vec<f64> {
        let mut rhs = vec![0.0; self.n()];
        self.a1.spmv_t_add(1.0, &self.b1, &mut rhs);
        self.a2.spmv_t_add(-1.0, &self.b2, &mut rhs);
        rhs
    }

    /// `‖S x − (A1ᵀb1 − A2ᵀb2)‖₂ / ‖A1ᵀb1 − A2ᵀb2‖₂`.
    pub fn normal_residual(&self, x: &[f64]) -> Result<f64> {
        let rhs = self.normal_rhs();
        let sx = self.s().mul_vec(x)?;
        let nrm = norm2(&rhs);
        if nrm == 0.0 {
            return Err(Error::ZeroNorm("normal-equation right-hand side"));
        }
        Ok(norm2(&sub(&sx, &rhs)) / nrm)
    }

    /// `(b1 − A1x; x; b2 − A2x)`: the block unknown matching a given `x`.
    pub fn lift(&self, x: &[f64]) -> Result<BlockVector> {
        check_len("lift", self.n(), x.len())?;
        let mut u = BlockVector::zeros(self.p(), self.n(), self.q());
        let (d1, ux, d2) = u.split_mut();
        d1.copy_from_slice(&self.b1);
        self.a1.spmv_add(-1.0, x, d1);
        ux.copy_from_slice(x);
        d2.copy_from_slice(&self.b2);
        self.a2.spmv_add(-1.0, x, d2);
        Ok(u)
    }

    /// Starting point `x⁽⁰⁾ = 0`, `(δ1⁽⁰⁾; δ2⁽⁰⁾) = b`.
    pub fn initial_guess(&self) -> BlockVector {
        self.lift(&vec![0.0; self.n()]).expect("length matches n")
    }

    pub fn assemble(&self, kind: SystemKind) -> BlockSystem {
        let (p, n, q) = (self.p(), self.n(), self.q());
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(p + q + 3 * (self.a1.nnz() + self.a2.nnz()));
        let (off_x, off_d2) = (p, p + n);

        entries.extend((0..p).map(|i| (i, i, 1.0)));
        entries.extend(self.a1.triplets().map(|(i, j, v)| (i, off_x + j, v)));
        match kind {
            SystemKind::Unsym13 => {
                entries.extend(self.a1.triplets().map(|(i, j, v)| (off_x + j, i, v)));
                entries.extend(self.a2.triplets().map(|(i, j, v)| (off_x + j, off_d2 + i, -v)));
            }
            SystemKind::SpdBlock14 => {
                let g = gram(&self.a1);
                for i in 0..n {
                    for (j, &v) in g.row(i).iter().enumerate() {
                        if v != 0.0 {
                            entries.push((off_x + i, off_x + j, v));
                        }
                    }
                }
                entries.extend(self.a2.triplets().map(|(i, j, v)| (off_x + j, off_d2 + i, v)));
            }
        }
        entries.extend(self.a2.triplets().map(|(i, j, v)| (off_d2 + i, off_x + j, v)));
        entries.extend((0..q).map(|i| (off_d2 + i, off_d2 + i, 1.0)));

        let dim = self.dim();
        let operator = SparseMatrix::from_triplets(dim, dim, &entries).expect("block indices in range");

        let mut rhs = BlockVector::zeros(p, n, q);
        let (r1, r2, r3) = rhs.split_mut();
        r1.copy_from_slice(&self.b1);
        if kind == SystemKind::SpdBlock14 {
            self.a1.spmv_t_add(1.0, &self.b1, r2);
        }
        r3.copy_from_slice(&self.b2);

        BlockSystem { kind, operator, rhs }
    }
}

/// Which of the two equivalent block systems is being solved.
///
/// `Unsym13` is `[[I, A1, 0], [A1ᵀ, 0, −A2ᵀ], [0, A2, I]]` with rhs `(b1; 0; b2)`;
/// `SpdBlock14` is `[[I, A1, 0], [0, A1ᵀA1, A2ᵀ], [0, A2, I]]` with rhs `(b1; A1ᵀb1; b2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Unsym13,
    SpdBlock14,
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemKind::Unsym13 => "unsym13",
            SystemKind::SpdBlock14 => "spdblock14",
        })
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unsym13" | "1.3" | "13" | "unsym" => Ok(SystemKind::Unsym13),
            "spdblock14" | "1.4" | "14" | "spd" => Ok(SystemKind::SpdBlock14),
            other => Err(Error::InvalidParameter(format!("unknown system kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub kind: SystemKind,
    pub operator: SparseMatrix,
    pub rhs: BlockVector,
}

impl BlockSystem {
    pub fn dim(&self) -> usize {
        self.operator.nrows()
    }

    /// `‖b − 𝒜u‖₂ / ‖b‖₂`.
    pub fn relative_residual(&self, u: &[f64]) -> Result<f64> {
        check_len("relative_residual", self.dim(), u.len())?;
        let bnorm = norm2(self.rhs.as_slice());
        if bnorm == 0.0 {
            return Err(Error::ZeroNorm("system right-hand side"));
        }
        let mut r = self.rhs.as_slice().to_vec();
        self.operator.spmv_add(-1.0, u, &mut r);
        Ok(norm2(&r) / bnorm)
    }
}

/// A vector partitioned as `(δ1; x; δ2)` with block lengths `(p, n, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    p: usize,
    n: usize,
    q: usize,
    data: Vec<f64>,
}

impl BlockVector {
    pub fn new(p: usize, n: usize, q: usize, data: Vec<f64>) -> Result<Self> {
        check_len("block vector", p + n + q, data.len())?;
        Ok(Self { p, n, q, data })
    }

    pub fn zeros(p: usize, n: usize, q: usize) -> Self {
        Self {
            p,
            n,
            q,
            data: vec![0.0; p + n + q],
        }
    }

    pub fn from_blocks(d1: &[f64], x: &[f64], d2: &[f64]) -> Self {
        let mut data = Vec::with_capacity(d1.len() + x.len() + d2.len());
        data.extend_from_slice(d1);
        data.extend_from_slice(x);
        data.extend_from_slice(d2);
        Self {
            p: d1.len(),
            n: x.len(),
            q: d2.len(),
            data,
        }
    }

    /// Same block layout, new data.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.p, self.n, self.q, data)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.p, self.n, self.q)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn d1(&self) -> &[f64] {
        &self.data[..self.p]
    }

    pub fn x(&self) -> &[f64] {
        &self.data[self.p..self.p + self.n]
    }

    pub fn d2(&self) -> &[f64] {
        &self.data[self.p + self.n..]
    }

    pub fn split_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64]) {
        let (d1, rest) = self.data.split_at_mut(self.p);
        let (x, d2) = rest.split_at_mut(self.n);
        (d1, x, d2)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationReport {
    pub s_spd: bool,
    pub a1_full_rank: bool,
    /// Smallest eigenvalue of `S`; NaN if the eigensolver failed.
    pub lambda_min: f64,
    /// Largest α for which the stationary splitting iteration is guaranteed to converge.
    pub alpha_max: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.s_spd && self.a1_full_rank
    }
}

pub fn validate(prob: &IlsProblem) -> ValidationReport {
    let a1_full_rank = cholesky(&gram(prob.a1())).is_ok();
    let s_spd = cholesky(prob.s()).is_ok();
    let lambda_min = jacobi_eigenvalues(prob.s())
        .ok()
        .and_then(|ev| ev.first().copied())
        .unwrap_or(f64::NAN);
    ValidationReport {
        s_spd,
        a1_full_rank,
        lambda_min,
        alpha_max: lambda_min / 2.0,
    }
}

/// Solves the normal equation `S x = A1ᵀb1 − A2ᵀb2` by Cholesky.
pub fn direct_oracle(prob: &IlsProblem) -> Result<Vec<f64>> {
    cholesky(prob.s())?.solve(&prob.normal_rhs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// `‖b − 𝒜u‖₂ / ‖b‖₂` on the system that was solved.
    pub res: f64,
    /// `‖x − x*‖₂ / ‖x*‖₂` on the x-block.
    pub err: f64,
}

pub fn metrics(prob: &IlsProblem, system: &BlockSystem, u: &BlockVector, xref: &[f64]) -> Result<Metrics> {
    check_len("metrics: block vector", prob.dim(), u.len())?;
    check_len("metrics: system", prob.dim(), system.dim())?;
    let res = system.relative_residual(u.as_slice())?;
    Ok(Metrics {
        res,
        err: relative_error(u.x(), xref)?,
    })
}

/// `‖x − x*‖₂ / ‖x*‖₂`.
pub fn relative_error(x: &[f64], xref: &[f64]) -> Result<f64> {
    check_len("relative_error", xref.len(), x.len())?;
    let nrm = norm2(xref);
    if nrm == 0.0 {
        return Err(Error::ZeroNorm("reference solution"));
    }
    Ok(norm2(&sub(x, xref)) / nrm)
}
