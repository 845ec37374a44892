//! Shared instances and dense reference computations for the integration tests.
#![allow(dead_code)]

use ils_core::generate::{gaussian, rng_from_seed};
use ils_core::precond::PrecondKind;
use ils_core::{DenseMatrix, IlsProblem, SparseMatrix, SystemKind};
use nalgebra::DMatrix;
use rand::Rng;

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.nrows(), m.ncols(), m.as_slice())
}

/// Random well-posed instance: Gaussian `A1`, and `A2` a Gaussian matrix scaled so
/// that `‖A2x‖ ≤ ½·σ_min(A1)‖x‖`, which keeps `λ_min(S) ≥ ¾·σ_min(A1)²`.
pub fn random_instance(p: usize, q: usize, n: usize, seed: u64) -> IlsProblem {
    assert!(p >= n);
    let mut rng = rng_from_seed(seed);
    let a1 = gaussian(&mut rng, p, n);
    let g2 = gaussian(&mut rng, q, n);
    let smin = to_na(&a1).singular_values().min();
    let gmax = if q == 0 {
        1.0
    } else {
        to_na(&g2).singular_values().max()
    };
    let s = 0.5 * smin / gmax;
    let a2 = DenseMatrix::from_fn(q, n, |i, j| s * g2[(i, j)]);
    let b1 = (0..p).map(|_| rng.random::<f64>()).collect();
    let b2 = (0..q).map(|_| rng.random::<f64>()).collect();
    IlsProblem::new(SparseMatrix::from_dense(&a1), SparseMatrix::from_dense(&a2), b1, b2).unwrap()
}

/// Random `(p, q, n)` with `n < p` drawn under the given caps.
pub fn random_dims(rng: &mut impl Rng, pmax: usize, qmax: usize, nmax: usize) -> (usize, usize, usize) {
    let n = rng.random_range(1..=nmax);
    let p = rng.random_range(n + 2..=pmax.max(n + 2));
    let q = rng.random_range(0..=qmax);
    (p, q, n)
}

fn blocks(prob: &IlsProblem) -> (DMatrix<f64>, DMatrix<f64>) {
    (to_na(&prob.a1().to_dense()), to_na(&prob.a2().to_dense()))
}

/// Assembles a `(p+n+q)` square matrix from its nonzero 3×3 blocks.
fn block3(prob: &IlsProblem, fill: impl Fn(usize, usize) -> Option<DMatrix<f64>>) -> DMatrix<f64> {
    let (p, n, q) = (prob.p(), prob.n(), prob.q());
    let sizes = [p, n, q];
    let offs = [0, p, p + n];
    let mut m = DMatrix::zeros(p + n + q, p + n + q);
    for bi in 0..3 {
        for bj in 0..3 {
            if let Some(b) = fill(bi, bj) {
                assert_eq!(b.shape(), (sizes[bi], sizes[bj]));
                m.view_mut((offs[bi], offs[bj]), (sizes[bi], sizes[bj])).copy_from(&b);
            }
        }
    }
    m
}

/// Dense system matrix built from the block formulas.
pub fn dense_system(prob: &IlsProblem, kind: SystemKind) -> DMatrix<f64> {
    let (a1, a2) = blocks(prob);
    let (p, q) = (prob.p(), prob.q());
    block3(prob, |i, j| match (kind, i, j) {
        (_, 0, 0) => Some(DMatrix::identity(p, p)),
        (_, 0, 1) => Some(a1.clone()),
        (_, 2, 1) => Some(a2.clone()),
        (_, 2, 2) => Some(DMatrix::identity(q, q)),
        (SystemKind::Unsym13, 1, 0) => Some(a1.transpose()),
        (SystemKind::Unsym13, 1, 2) => Some(-a2.transpose()),
        (SystemKind::SpdBlock14, 1, 1) => Some(a1.transpose() * &a1),
        (SystemKind::SpdBlock14, 1, 2) => Some(a2.transpose()),
        _ => None,
    })
}

pub fn dense_rhs(prob: &IlsProblem, kind: SystemKind) -> Vec<f64> {
    let mut b = prob.b1().to_vec();
    match kind {
        SystemKind::Unsym13 => b.extend(std::iter::repeat_n(0.0, prob.n())),
        SystemKind::SpdBlock14 => {
            let (a1, _) = blocks(prob);
            let v = a1.transpose() * nalgebra::DVector::from_column_slice(prob.b1());
            b.extend(v.iter());
        }
    }
    b.extend_from_slice(prob.b2());
    b
}

/// Dense preconditioner matrix for each kind, from its block definition.
pub fn dense_precond(prob: &IlsProblem, kind: PrecondKind) -> DMatrix<f64> {
    let (a1, a2) = blocks(prob);
    let (p, n, q) = (prob.p(), prob.n(), prob.q());
    let g = a1.transpose() * &a1;
    let dim = p + n + q;
    match kind {
        PrecondKind::None => DMatrix::identity(dim, dim),
        PrecondKind::Palpha { alpha } => {
            let mut m = dense_system(prob, SystemKind::Unsym13);
            for i in p..p + n {
                m[(i, i)] = alpha;
            }
            m
        }
        _ => block3(prob, |i, j| match (i, j) {
            (0, 0) => Some(DMatrix::identity(p, p)),
            (1, 1) => Some(g.clone()),
            (2, 2) => Some(DMatrix::identity(q, q)),
            (0, 1) if matches!(kind, PrecondKind::Bs3 | PrecondKind::But) => Some(a1.clone()),
            (1, 2) if matches!(kind, PrecondKind::Bs2 | PrecondKind::But) => Some(a2.transpose()),
            _ => None,
        }),
    }
}

/// `x*` from the normal equation, via dense LU.
pub fn normal_solution(prob: &IlsProblem) -> Vec<f64> {
    let (a1, a2) = blocks(prob);
    let s = a1.transpose() * &a1 - a2.transpose() * &a2;
    let rhs = a1.transpose() * nalgebra::DVector::from_column_slice(prob.b1())
        - a2.transpose() * nalgebra::DVector::from_column_slice(prob.b2());
    s.lu().solve(&rhs).expect("S nonsingular").as_slice().to_vec()
}

/// Eigenvalues of `S` from the nalgebra symmetric solver, ascending.
pub fn s_eigenvalues(prob: &IlsProblem) -> Vec<f64> {
    let (a1, a2) = blocks(prob);
    let s = a1.transpose() * &a1 - a2.transpose() * &a2;
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Dense iteration matrix `𝒫⁻¹𝒬` of the splitting.
pub fn dense_iteration_matrix(prob: &IlsProblem, alpha: f64) -> DMatrix<f64> {
    let (p, n, q) = (prob.p(), prob.n(), prob.q());
    let pm = dense_precond(prob, PrecondKind::Palpha { alpha });
    let mut qm = DMatrix::zeros(p + n + q, p + n + q);
    for i in p..p + n {
        qm[(i, i)] = alpha;
    }
    pm.lu().solve(&qm).expect("P nonsingular")
}

/// Power iteration for the dominant eigenvalue modulus. The eigenvalues of the
/// splitting matrix are real, so the plain norm ratio converges.
pub fn power_iteration(m: &DMatrix<f64>, iters: usize) -> f64 {
    let mut v = nalgebra::DVector::from_fn(m.nrows(), |i, _| 1.0 + (i as f64 * 0.37).sin());
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..iters {
        let w = m * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        est = nw;
        v = w / nw;
    }
    est
}

pub fn rel_diff(x: &[f64], y: &[f64]) -> f64 {
    let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let r: f64 = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    d / r
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Eigenvalues of `𝒫⁻¹𝒜` from nalgebra's real Schur form of the explicitly formed
/// dense product. The iteration is capped; unbounded Schur stalls on the large
/// cluster at 1.
pub fn palpha_oracle_spectrum(prob: &IlsProblem, alpha: f64) -> Vec<num_complex::Complex64> {
    let p = dense_precond(prob, PrecondKind::Palpha { alpha });
    let a = dense_system(prob, SystemKind::Unsym13);
    let pa = p.lu().solve(&a).expect("P nonsingular");
    let schur = nalgebra::Schur::try_new(pa, 1e-14, 100_000).expect("Schur iteration converged");
    schur.complex_eigenvalues().iter().copied().collect()
}
