//! Spectrum of the `P(α)`-preconditioned operator from the spectrum of `S`.
//!
//! With `𝒜 = 𝒫 − 𝒬`, `𝒬 = diag(0, αI, 0)`, the eigenvalues of `𝒫⁻¹𝒜` are 1 with
//! multiplicity `p + q` and `θ = μ / (μ − α)` for every eigenvalue μ of `S`.

use num_complex::Complex64;
use serde::Serialize;

use crate::dense::{cholesky, eigenvalues_general, jacobi_eigen, jacobi_eigenvalues, DenseMatrix};
use crate::error::{Error, Result};
use crate::mtx::{fmt_f64, CsvRecord};
use crate::precond::Preconditioner;
use crate::problem::{BlockSystem, IlsProblem, SystemKind};
use crate::vector::norm2;

/// `|μ − α|` at or below this times `max|μ|` is treated as the pole of the map.
pub const DEGENERATE_REL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    /// Eigenvalues of `S`, ascending.
    pub mu: Vec<f64>,
    /// `μᵢ / (μᵢ − α)`; `+∞` where `μᵢ ≈ α`.
    pub theta: Vec<f64>,
    pub one_multiplicity: usize,
    pub alpha: f64,
    /// `max |θᵢ − 1|`.
    pub cluster_radius: f64,
    /// Some `μᵢ` coincides with α.
    pub degenerate: bool,
}

impl SpectrumReport {
    /// Full spectrum of `𝒫⁻¹𝒜`: the unit eigenvalues followed by `theta`.
    pub fn full_spectrum(&self) -> Vec<f64> {
        let mut all = vec![1.0; self.one_multiplicity];
        all.extend_from_slice(&self.theta);
        all
    }
}

/// Applies the eigenvalue map to a precomputed spectrum of `S`.
pub fn map_spectrum(mu: Vec<f64>, alpha: f64, one_multiplicity: usize) -> SpectrumReport {
    let scale = mu.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut degenerate = false;
    let theta: Vec<f64> = mu
        .iter()
        .map(|&m| {
            let gap = m - alpha;
            if gap.abs() <= DEGENERATE_REL_TOL * scale {
                degenerate = true;
                f64::INFINITY
            } else {
                m / gap
            }
        })
        .collect();
    let cluster_radius = theta.iter().fold(0.0_f64, |r, t| r.max((t - 1.0).abs()));
    SpectrumReport {
        mu,
        theta,
        one_multiplicity,
        alpha,
        cluster_radius,
        degenerate,
    }
}

/// Errors with [`Error::NotSpd`] unless `S − αI` is positive definite.
pub fn preconditioned_spectrum(prob: &IlsProblem, alpha: f64) -> Result<SpectrumReport> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "alpha must be finite and nonnegative, got {alpha}"
        )));
    }
    let mut shifted = prob.s().clone();
    shifted.shift_diagonal(-alpha);
    cholesky(&shifted)?;
    let mu = jacobi_eigenvalues(prob.s())?;
    Ok(map_spectrum(mu, alpha, prob.p() + prob.q()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub checked: usize,
    /// Largest `‖𝒜ℓ − θ𝒫ℓ‖₂ / ‖ℓ‖₂` over all eigenpairs.
    pub max_violation: f64,
    /// Indices of eigenpairs whose violation exceeds the tolerance.
    pub failures: Vec<usize>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Verifies each lifted eigenvector `ℓ = (−A1w; w; −A2w)` of `S w = μ w` against
/// `𝒜ℓ = θ 𝒫ℓ`, using `𝒫ℓ = 𝒜ℓ + (0; αw; 0)`.
pub fn eigenpair_check(prob: &IlsProblem, alpha: f64, tol: f64) -> Result<CheckReport> {
    let eig = jacobi_eigen(prob.s())?;
    let system = prob.assemble(SystemKind::Unsym13);
    let (p, n) = (prob.p(), prob.n());
    let mut report = CheckReport {
        checked: n,
        max_violation: 0.0,
        failures: Vec::new(),
    };
    for (i, &mu) in eig.eigenvalues.iter().enumerate() {
        let w = eig.eigenvectors.column(i);
        let a1w = prob.a1().spmv(&w)?;
        let a2w = prob.a2().spmv(&w)?;
        let neg = |v: Vec<f64>| v.into_iter().map(|x| -x).collect::<Vec<_>>();
        let ell = crate::problem::BlockVector::from_blocks(&neg(a1w), &w, &neg(a2w));
        let a_ell = system.operator.spmv(ell.as_slice())?;
        let mut p_ell = a_ell.clone();
        for (pi, wi) in p_ell[p..p + n].iter_mut().zip(&w) {
            *pi += alpha * wi;
        }
        let theta = mu / (mu - alpha);
        let diff: Vec<f64> = a_ell.iter().zip(&p_ell).map(|(a, b)| a - theta * b).collect();
        let violation = norm2(&diff) / norm2(ell.as_slice());
        if violation.is_nan() || violation > tol {
            report.failures.push(i);
        }
        report.max_violation = report.max_violation.max(violation);
    }
    Ok(report)
}

/// `λ_min(S) / 2`, the limit of the guaranteed-convergence range of α.
pub fn alpha_bound(prob: &IlsProblem) -> Result<f64> {
    let lambda_min = jacobi_eigenvalues(prob.s())?[0];
    if lambda_min <= 0.0 {
        return Err(Error::Validation(format!(
            "S is not positive definite (λ_min = {lambda_min:e})"
        )));
    }
    Ok(lambda_min / 2.0)
}

/// Dense `M⁻¹𝒜`, one preconditioner apply per column. Only meant for small systems.
pub fn dense_preconditioned_operator(system: &BlockSystem, m: &Preconditioner<'_>) -> Result<DenseMatrix> {
    m.check_system(system.kind)?;
    let dim = system.dim();
    let a = system.operator.to_dense();
    let mut out = DenseMatrix::zeros(dim, dim);
    let mut z = vec![0.0; dim];
    for j in 0..dim {
        m.apply_into(&a.column(j), &mut z)?;
        for (i, v) in z.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}

/// Eigenvalues of `M⁻¹𝒜` by the dense unsymmetric eigensolver.
pub fn dense_spectrum(system: &BlockSystem, m: &Preconditioner<'_>) -> Result<Vec<Complex64>> {
    eigenvalues_general(&dense_preconditioned_operator(system, m)?)
}

/// One eigenvalue in the spectrum CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPoint {
    pub re: f64,
    pub im: f64,
    pub method: String,
    pub alpha: Option<f64>,
}

impl CsvRecord for SpectrumPoint {
    fn header() -> &'static [&'static str] {
        &["re", "im", "method", "alpha"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            fmt_f64(self.re),
            fmt_f64(self.im),
            self.method.clone(),
            self.alpha.map(fmt_f64).unwrap_or_default(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseMatrix;

    fn diag_problem() -> IlsProblem {
        IlsProblem::new(
            SparseMatrix::from_dense(&DenseMatrix::from_diag(&[1.0, 2.0_f64.sqrt()])),
            SparseMatrix::zeros(0, 2),
            vec![1.0, 1.0],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn alpha_zero_is_identity() {
        let rep = preconditioned_spectrum(&diag_problem(), 0.0).unwrap();
        assert!(rep.theta.iter().all(|&t| t == 1.0));
        assert_eq!(rep.cluster_radius, 0.0);
        assert_eq!(rep.one_multiplicity, 2);
    }

    #[test]
    fn diag_map() {
        let rep = preconditioned_spectrum(&diag_problem(), 0.5).unwrap();
        assert!((rep.theta[0] - 2.0).abs() < 1e-12);
        assert!((rep.theta[1] - 4.0 / 3.0).abs() < 1e-12);
        assert!((rep.cluster_radius - 1.0).abs() < 1e-12);
        assert!(!rep.degenerate);
    }

    #[test]
    fn alpha_above_lambda_min_rejected() {
        assert!(matches!(
            preconditioned_spectrum(&diag_problem(), 1.5),
            Err(Error::NotSpd { .. })
        ));
    }

    #[test]
    fn degenerate_flagged() {
        let rep = map_spectrum(vec![1.0, 2.0], 1.0, 0);
        assert!(rep.degenerate);
        assert!(rep.theta[0].is_infinite());
        assert!(rep.cluster_radius.is_infinite());
    }

    #[test]
    fn eigenpair_one_d() {
        let prob = IlsProblem::new(
            SparseMatrix::from_dense(&DenseMatrix::from_diag(&[2.0])),
            SparseMatrix::from_dense(&DenseMatrix::from_diag(&[1.0])),
            vec![1.0],
            vec![0.0],
        )
        .unwrap();
        let rep = eigenpair_check(&prob, 0.5, 1e-12).unwrap();
        assert!(rep.passed(), "{rep:?}");
        let rep = eigenpair_check(&prob, 0.0, 0.0).unwrap();
        assert_eq!(rep.max_violation, 0.0);
    }

    #[test]
    fn bounds() {
        let id = IlsProblem::new(
            SparseMatrix::identity(3),
            SparseMatrix::zeros(0, 3),
            vec![1.0; 3],
            vec![],
        )
        .unwrap();
        assert!((alpha_bound(&id).unwrap() - 0.5).abs() < 1e-15);
        let toy = IlsProblem::new(
            SparseMatrix::identity(2),
            SparseMatrix::scaled_eye(2, 2, 0.3),
            vec![1.0; 2],
            vec![1.0; 2],
        )
        .unwrap();
        assert!((alpha_bound(&toy).unwrap() - 0.455).abs() < 1e-15);
    }

    #[test]
    fn csv_fields() {
        let p = SpectrumPoint {
            re: 1.0,
            im: 0.0,
            method: "palpha".into(),
            alpha: None,
        };
        assert_eq!(
            p.fields(),
            ["1.0000000000000000e0", "0.0000000000000000e0", "palpha", ""]
        );
    }
}
