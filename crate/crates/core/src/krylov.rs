//! Left-preconditioned GMRES and the stationary splitting iteration.

use std::time::Instant;

use serde::Serialize;

use crate::dense::jacobi_eigenvalues;
use crate::error::{check_len, Error, Result};
use crate::precond::{setup, PrecondKind, Preconditioner};
use crate::problem::{BlockSystem, BlockVector, IlsProblem, SystemKind};
use crate::vector::{axpy, dot, norm2, scale};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAXIT: usize = 1500;
/// Arnoldi vectors with norm at or below this are treated as a breakdown.
pub const BREAKDOWN_TOL: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub maxit: usize,
    /// Restart length; `None` runs full GMRES.
    pub restart: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            maxit: DEFAULT_MAXIT,
            restart: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.maxit == 0 {
            return Err(Error::InvalidParameter("maxit must be at least 1".into()));
        }
        if self.restart == Some(0) {
            return Err(Error::InvalidParameter("restart must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iters: usize,
    /// True relative residual `‖b − 𝒜u‖₂ / ‖b‖₂` after each iteration, starting with `u0`.
    pub res_history: Vec<f64>,
    /// Preconditioned residual estimates `‖M⁻¹(b − 𝒜u)‖₂ / ‖M⁻¹b‖₂` from the Arnoldi
    /// least-squares problem. Empty for the stationary iteration.
    pub precond_res_history: Vec<f64>,
    pub final_res: f64,
    pub final_err: Option<f64>,
    pub wall_seconds: f64,
    pub converged: bool,
    /// The Krylov space became invariant before `maxit`.
    pub breakdown: bool,
}

impl SolveReport {
    fn start(res0: f64) -> Self {
        Self {
            iters: 0,
            res_history: vec![res0],
            precond_res_history: Vec::new(),
            final_res: res0,
            final_err: None,
            wall_seconds: 0.0,
            converged: false,
            breakdown: false,
        }
    }
}

/// Left-preconditioned GMRES on `M⁻¹𝒜u = M⁻¹b`.
///
/// Arnoldi uses modified Gram–Schmidt and the Hessenberg least-squares problem is
/// reduced by Givens rotations. After every step the iterate is formed and its true
/// residual is checked; only that value decides convergence. Exceeding `cfg.maxit`
/// returns a report with `converged = false`.
pub fn gmres(
    system: &BlockSystem,
    m: &Preconditioner<'_>,
    u0: &BlockVector,
    cfg: &SolverConfig,
) -> Result<(BlockVector, SolveReport)> {
    cfg.validate()?;
    m.check_system(system.kind)?;
    let dim = system.dim();
    check_len("gmres: preconditioner", dim, m.dim())?;
    check_len("gmres: initial guess", dim, u0.len())?;
    let start = Instant::now();

    let b = system.rhs.as_slice();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Err(Error::ZeroNorm("system right-hand side"));
    }
    let mut mb = vec![0.0; dim];
    m.apply_into(b, &mut mb)?;
    let mbnorm = norm2(&mb);

    let mut u = u0.as_slice().to_vec();
    let mut r = vec![0.0; dim];
    let true_res = |u: &[f64], r: &mut Vec<f64>| {
        r.copy_from_slice(b);
        system.operator.spmv_add(-1.0, u, r);
        norm2(r) / bnorm
    };
    let mut report = SolveReport::start(true_res(&u, &mut r));
    let cycle_len = cfg.restart.unwrap_or(cfg.maxit).min(cfg.maxit);
    let mut w = vec![0.0; dim];
    let mut trial = vec![0.0; dim];

    'outer: while report.final_res > cfg.tol && report.iters < cfg.maxit {
        // r holds b − 𝒜u from the last true-residual evaluation
        let mut z = vec![0.0; dim];
        m.apply_into(&r, &mut z)?;
        let beta = norm2(&z);
        if report.precond_res_history.is_empty() {
            report.precond_res_history.push(beta / mbnorm);
        }
        if beta <= BREAKDOWN_TOL {
            // M⁻¹r vanishes although the true residual is above tolerance
            return Err(Error::Breakdown {
                iteration: report.iters,
                residual: report.final_res,
            });
        }
        scale(1.0 / beta, &mut z);
        let mut basis: Vec<Vec<f64>> = vec![z];
        // columns of the rotated Hessenberg matrix (upper triangular part)
        let mut rcols: Vec<Vec<f64>> = Vec::new();
        let mut rotations: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![beta];

        for j in 0..cycle_len.min(cfg.maxit - report.iters) {
            system.operator.spmv_into(&basis[j], &mut trial);
            m.apply_into(&trial, &mut w)?;
            let mut h = Vec::with_capacity(j + 2);
            for v in &basis {
                let hij = dot(&w, v);
                axpy(-hij, v, &mut w);
                h.push(hij);
            }
            let hnext = norm2(&w);
            h.push(hnext);

            for (i, &(c, s)) in rotations.iter().enumerate() {
                let (a, bb) = (h[i], h[i + 1]);
                h[i] = c * a + s * bb;
                h[i + 1] = -s * a + c * bb;
            }
            let (a, bb) = (h[j], h[j + 1]);
            let rho = a.hypot(bb);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, bb / rho) };
            h[j] = rho;
            h.truncate(j + 1);
            rotations.push((c, s));
            let gj = g[j];
            g[j] = c * gj;
            g.push(-s * gj);
            rcols.push(h);
            report.iters += 1;
            report.precond_res_history.push(g[j + 1].abs() / mbnorm);

            let y = back_substitute(&rcols, &g[..=j]);
            let mut candidate = u.clone();
            for (v, yi) in basis.iter().zip(&y) {
                axpy(*yi, v, &mut candidate);
            }
            let res = true_res(&candidate, &mut r);
            report.res_history.push(res);
            report.final_res = res;

            let broke_down = hnext <= BREAKDOWN_TOL;
            if res <= cfg.tol || broke_down || report.iters >= cfg.maxit || j + 1 == cycle_len {
                u = candidate;
                if res <= cfg.tol {
                    report.breakdown = broke_down;
                    break 'outer;
                }
                if broke_down {
                    return Err(Error::Breakdown {
                        iteration: report.iters,
                        residual: res,
                    });
                }
                continue 'outer;
            }
            let mut next = w.clone();
            scale(1.0 / hnext, &mut next);
            basis.push(next);
        }
    }

    report.converged = report.final_res <= cfg.tol;
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((u0.with_data(u)?, report))
}

/// Solves the leading upper-triangular system `R y = g`.
fn back_substitute(rcols: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let mut y = g.to_vec();
    for i in (0..k).rev() {
        y[i] /= rcols[i][i];
        let yi = y[i];
        for (l, yl) in y.iter_mut().enumerate().take(i) {
            *yl -= rcols[i][l] * yi;
        }
    }
    y
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryReport {
    pub solve: SolveReport,
    /// `λ_min(S) / 2`.
    pub alpha_max: f64,
    /// Whether `α < λ_min(S) / 2`, the guaranteed-convergence range.
    pub bound_holds: bool,
}

/// Splitting iteration `𝒫u^{k+1} = 𝒬u^k + b` with `𝒬 = diag(0, αI, 0)`, started at
/// `x⁽⁰⁾ = 0`. Residuals are measured on the unsymmetric system.
pub fn stationary(prob: &IlsProblem, alpha: f64, cfg: &SolverConfig) -> Result<(BlockVector, StationaryReport)> {
    stationary_with(prob, alpha, cfg, |_, _| {})
}

/// [`stationary`] with a callback receiving `(k, u^k)` for every iterate, `u^0` included.
pub fn stationary_with(
    prob: &IlsProblem,
    alpha: f64,
    cfg: &SolverConfig,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<(BlockVector, StationaryReport)> {
    cfg.validate()?;
    let m = setup(PrecondKind::Palpha { alpha }, prob)?;
    let lambda_min = min_eigenvalue(prob)?;
    let alpha_max = lambda_min / 2.0;

    let start = Instant::now();
    let system = prob.assemble(SystemKind::Unsym13);
    let b = system.rhs.as_slice();
    let (p, n) = (prob.p(), prob.n());
    let mut u = prob.initial_guess().into_vec();
    let mut rhs = vec![0.0; u.len()];
    let mut report = SolveReport::start(system.relative_residual(&u)?);
    observe(0, &u);

    while report.final_res > cfg.tol && report.iters < cfg.maxit && report.final_res.is_finite() {
        rhs.copy_from_slice(b);
        for (ri, xi) in rhs[p..p + n].iter_mut().zip(&u[p..p + n]) {
            *ri += alpha * xi;
        }
        m.apply_into(&rhs, &mut u)?;
        report.iters += 1;
        report.final_res = system.relative_residual(&u)?;
        report.res_history.push(report.final_res);
        observe(report.iters, &u);
    }
    report.converged = report.final_res <= cfg.tol;
    report.wall_seconds = start.elapsed().as_secs_f64();

    let stat = StationaryReport {
        solve: report,
        alpha_max,
        bound_holds: alpha < alpha_max,
    };
    Ok((prob.initial_guess().with_data(u)?, stat))
}

/// `ρ(𝒯) = max_μ |α / (α − μ)|` over the spectrum of `S`.
pub fn spectral_radius_t(prob: &IlsProblem, alpha: f64) -> Result<f64> {
    let mu = jacobi_eigenvalues(prob.s())?;
    Ok(spectral_radius_from(&mu, alpha))
}

/// [`spectral_radius_t`] for a precomputed spectrum.
pub fn spectral_radius_from(mu: &[f64], alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    mu.iter()
        .map(|&m| {
            let d = alpha - m;
            if d == 0.0 {
                f64::INFINITY
            } else {
                (alpha / d).abs()
            }
        })
        .fold(0.0, f64::max)
}

fn min_eigenvalue(prob: &IlsProblem) -> Result<f64> {
    jacobi_eigenvalues(prob.s())?
        .first()
        .copied()
        .ok_or(Error::ZeroNorm("S"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::problem::direct_oracle;
    use crate::sparse::SparseMatrix;

    fn diag_problem() -> IlsProblem {
        // S = diag(1, 2)
        IlsProblem::new(
            SparseMatrix::from_dense(&DenseMatrix::from_diag(&[1.0, 2.0_f64.sqrt()])),
            SparseMatrix::zeros(0, 2),
            vec![1.0, 1.0],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn identity_operator_one_step() {
        let prob = diag_problem();
        let mut sys = prob.assemble(SystemKind::Unsym13);
        sys.operator = SparseMatrix::identity(4);
        let m = setup(PrecondKind::None, &prob).unwrap();
        let u0 = BlockVector::zeros(2, 2, 0);
        let (u, rep) = gmres(&sys, &m, &u0, &SolverConfig::default()).unwrap();
        assert_eq!(rep.iters, 1);
        assert!(rep.final_res <= 1e-15);
        assert!(crate::vector::rel_diff(u.as_slice(), sys.rhs.as_slice()) <= 1e-15);
    }

    #[test]
    fn exact_preconditioner_one_step() {
        let prob = diag_problem();
        let sys = prob.assemble(SystemKind::Unsym13);
        let m = setup(PrecondKind::Palpha { alpha: 0.0 }, &prob).unwrap();
        let (u, rep) = gmres(&sys, &m, &prob.initial_guess(), &SolverConfig::default()).unwrap();
        assert_eq!(rep.iters, 1);
        assert!(rep.converged && rep.final_res <= 1e-12);
        assert_eq!(rep.res_history.len(), 2);
        let x = direct_oracle(&prob).unwrap();
        assert!((u.x()[0] - x[0]).abs() < 1e-12);
    }

    #[test]
    fn maxit_gives_unconverged_report() {
        let prob = diag_problem();
        let sys = prob.assemble(SystemKind::Unsym13);
        let m = setup(PrecondKind::None, &prob).unwrap();
        let cfg = SolverConfig {
            maxit: 1,
            ..SolverConfig::default()
        };
        let (_, rep) = gmres(&sys, &m, &prob.initial_guess(), &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iters, 1);
        assert_eq!(rep.res_history.len(), 2);
    }

    #[test]
    fn mismatched_system_rejected() {
        let prob = diag_problem();
        let sys = prob.assemble(SystemKind::SpdBlock14);
        let m = setup(PrecondKind::Palpha { alpha: 0.1 }, &prob).unwrap();
        let r = gmres(&sys, &m, &prob.initial_guess(), &SolverConfig::default());
        assert!(matches!(r, Err(Error::IncompatibleSystem { .. })));
    }

    #[test]
    fn restarted_converges() {
        let prob = diag_problem();
        let sys = prob.assemble(SystemKind::Unsym13);
        let m = setup(PrecondKind::None, &prob).unwrap();
        let cfg = SolverConfig {
            restart: Some(2),
            ..SolverConfig::default()
        };
        let (_, rep) = gmres(&sys, &m, &prob.initial_guess(), &cfg).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.res_history.len(), rep.iters + 1);
    }

    #[test]
    fn spectral_radius_diag() {
        let prob = diag_problem();
        assert_eq!(spectral_radius_t(&prob, 0.0).unwrap(), 0.0);
        assert!((spectral_radius_t(&prob, 0.4).unwrap() - 0.4 / 0.6).abs() < 1e-12);
        assert!((spectral_radius_t(&prob, 0.6).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn stationary_converges_and_diverges() {
        let prob = diag_problem();
        let (_, rep) = stationary(&prob, 0.4, &SolverConfig::default()).unwrap();
        assert!(rep.solve.converged && rep.bound_holds);
        let cfg = SolverConfig {
            maxit: 100,
            ..SolverConfig::default()
        };
        let (_, rep) = stationary(&prob, 0.6, &cfg).unwrap();
        assert!(!rep.solve.converged && !rep.bound_holds);
        assert!(rep.solve.final_res > 10.0 * rep.solve.res_history[1]);
    }

    #[test]
    fn stationary_tiny_alpha() {
        let (_, rep) = stationary(&diag_problem(), 1e-14, &SolverConfig::default()).unwrap();
        assert!(rep.solve.converged && rep.solve.iters <= 2);
    }
}
