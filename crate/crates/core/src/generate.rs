//! Seeded test-problem generators.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`: uniform `[0, 1)`
//! draws for right-hand sides and standard normal draws for matrix sources, taken
//! in the order documented on each generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dense::{cholesky, householder_qr_orthogonal, smallest_singular_value, DenseMatrix};
use crate::error::{Error, Result};
use crate::problem::IlsProblem;
use crate::sparse::SparseMatrix;

/// Scale of the rectangular identity used as `A2` in the sparse benchmark problems.
pub const SPARSE_A2_SCALE: f64 = 0.3;
/// Noise level of the total least squares benchmark problems.
pub const TLS_EPS: f64 = 1e-4;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Default number of negative-signature rows for a sparse source with `p` rows.
pub fn default_q(p: usize) -> usize {
    p.div_ceil(4)
}

/// `A1 = a1`, `A2 = 0.3·eye(q, n)`, `b1` then `b2` uniform on `[0, 1)`.
pub fn gen_sparse(a1: SparseMatrix, q: usize, seed: u64) -> Result<IlsProblem> {
    let mut rng = rng_from_seed(seed);
    let n = a1.ncols();
    let b1 = uniform_vec(&mut rng, a1.nrows());
    let b2 = uniform_vec(&mut rng, q);
    let a2 = SparseMatrix::scaled_eye(q, n, SPARSE_A2_SCALE);
    IlsProblem::new(a1, a2, b1, b2)
}

/// Source of the orthogonal factors `Y`, `Z` in [`gen_tls_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrthogonalFactors {
    /// Householder QR of seeded Gaussian matrices.
    Random,
    /// `Y = I`, `Z = I`; no random draws are spent on them.
    Identity,
}

#[derive(Debug, Clone)]
pub struct TlsInstance {
    pub problem: IlsProblem,
    /// `(BᵀB − σ²I)⁻¹Bᵀd`, solved directly.
    pub x_tls: Vec<f64>,
    /// Smallest singular value of `(B, d)`.
    pub sigma: f64,
}

pub fn gen_tls(p: usize, q: usize, n: usize, eps: f64, seed: u64) -> Result<TlsInstance> {
    gen_tls_with(p, q, n, eps, seed, OrthogonalFactors::Random)
}

/// Total least squares instance recast as ILS.
///
/// `B̃ = Y·[D; 0]·Zᵀ` with `D = diag(1, 1/2, …, 1/n)`, `B = B̃ + εE`, `d = B̃·1 + εf`,
/// `A1 = B`, `A2 = σ·eye(q, n)`, `b1 = d`, `b2 = 0`, where σ is the smallest singular
/// value of `(B, d)`. Draw order: the `p×p` source of `Y`, the `n×n` source of `Z`,
/// `E` row by row, then `f`.
pub fn gen_tls_with(
    p: usize,
    q: usize,
    n: usize,
    eps: f64,
    seed: u64,
    factors: OrthogonalFactors,
) -> Result<TlsInstance> {
    if n == 0 || p < n {
        return Err(Error::InvalidParameter(format!("need p ≥ n ≥ 1, got p={p}, n={n}")));
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eps must be finite and ≥ 0, got {eps}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let (y, z) = match factors {
        OrthogonalFactors::Random => {
            let y = householder_qr_orthogonal(&gaussian(&mut rng, p, p))?;
            let z = householder_qr_orthogonal(&gaussian(&mut rng, n, n))?;
            (y, z)
        }
        OrthogonalFactors::Identity => (DenseMatrix::identity(p), DenseMatrix::identity(n)),
    };

    // B̃[i][j] = Σ_k Y[i][k]·(1/(k+1))·Z[j][k]
    let mut zd = z.clone();
    for j in 0..n {
        for (k, v) in zd.row_mut(j).iter_mut().enumerate() {
            *v /= (k + 1) as f64;
        }
    }
    let mut b_tilde = DenseMatrix::zeros(p, n);
    for i in 0..p {
        let yi = &y.row(i)[..n];
        for (j, out) in b_tilde.row_mut(i).iter_mut().enumerate() {
            *out = yi.iter().zip(zd.row(j)).map(|(a, b)| a * b).sum();
        }
    }

    let e = gaussian(&mut rng, p, n);
    let f: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let mut b = b_tilde.clone();
    let mut d = Vec::with_capacity(p);
    for (i, fi) in f.iter().enumerate() {
        let row_sum: f64 = b_tilde.row(i).iter().sum();
        d.push(row_sum + eps * fi);
        for (bij, eij) in b.row_mut(i).iter_mut().zip(e.row(i)) {
            *bij += eps * eij;
        }
    }

    let sigma = smallest_singular_value(&b.append_column(&d)?)?;

    let mut shifted = b.gram();
    shifted.shift_diagonal(-sigma * sigma);
    let factor = cholesky(&shifted)
        .map_err(|_| Error::Generation(format!("BᵀB − σ²I is not positive definite (σ = {sigma:e})")))?;
    let x_tls = factor.solve(&b.tr_mul_vec(&d)?)?;

    let problem = IlsProblem::new(
        SparseMatrix::from_dense(&b),
        SparseMatrix::scaled_eye(q, n, sigma),
        d,
        vec![0.0; q],
    )
    .map_err(|e| Error::Generation(e.to_string()))?;
    Ok(TlsInstance { problem, x_tls, sigma })
}

fn uniform_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random::<f64>()).collect()
}

/// Row-major standard normal matrix.
pub fn gaussian(rng: &mut ChaCha8Rng, nrows: usize, ncols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(nrows, ncols, |_, _| rng.sample(StandardNormal))
}
