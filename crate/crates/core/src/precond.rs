//! Block preconditioners for the two block systems.
//!
//! Every variant needs at most one dense Cholesky factor, computed once in
//! [`setup`]: `A1ᵀA1` for the baselines, `S − αI` for [`PrecondKind::Palpha`].

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Serialize;

use crate::dense::{cholesky, CholeskyFactor};
use crate::error::{check_len, Error, Result};
use crate::problem::{BlockVector, IlsProblem, SystemKind};
use crate::sparse::{gram, SparseMatrix};

/// Default α for sparse-source problems.
pub const DEFAULT_ALPHA_SPARSE: f64 = 1e-6;
/// Default α for total least squares problems.
pub const DEFAULT_ALPHA_TLS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "tag", rename_all = "lowercase")]
pub enum PrecondKind {
    None,
    /// `diag(I, A1ᵀA1, I)`
    Bs1,
    /// `[[I, 0, 0], [0, A1ᵀA1, A2ᵀ], [0, 0, I]]`
    Bs2,
    /// `[[I, A1, 0], [0, A1ᵀA1, 0], [0, 0, I]]`
    Bs3,
    /// `[[I, A1, 0], [0, A1ᵀA1, A2ᵀ], [0, 0, I]]`
    But,
    /// `[[I, A1, 0], [A1ᵀ, αI, −A2ᵀ], [0, A2, I]]`, which equals the unsymmetric
    /// system matrix at `α = 0`.
    Palpha {
        alpha: f64,
    },
}

impl PrecondKind {
    /// The system this preconditioner is built for; `None` fits both.
    pub fn system(&self) -> Option<SystemKind> {
        match self {
            PrecondKind::None => None,
            PrecondKind::Palpha { .. } => Some(SystemKind::Unsym13),
            _ => Some(SystemKind::SpdBlock14),
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            PrecondKind::Palpha { alpha } => Some(*alpha),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PrecondKind::None => "none",
            PrecondKind::Bs1 => "bs1",
            PrecondKind::Bs2 => "bs2",
            PrecondKind::Bs3 => "bs3",
            PrecondKind::But => "but",
            PrecondKind::Palpha { .. } => "palpha",
        }
    }

    /// Parses a method name; `alpha` is used only for `palpha`.
    pub fn parse_with_alpha(name: &str, alpha: f64) -> Result<Self> {
        Ok(match name.parse::<PrecondKind>()? {
            PrecondKind::Palpha { .. } => PrecondKind::Palpha { alpha },
            k => k,
        })
    }
}

impl fmt::Display for PrecondKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrecondKind::Palpha { alpha } => write!(f, "palpha(alpha={alpha:e})"),
            k => f.write_str(k.name()),
        }
    }
}

/// Accepts `none`, `bs1`, `bs2`, `bs3`, `but`, `palpha` (or `p`); `palpha` parses to α = 0.
impl FromStr for PrecondKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "no" | "i" => Ok(PrecondKind::None),
            "bs1" => Ok(PrecondKind::Bs1),
            "bs2" => Ok(PrecondKind::Bs2),
            "bs3" => Ok(PrecondKind::Bs3),
            "but" => Ok(PrecondKind::But),
            "palpha" | "p" => Ok(PrecondKind::Palpha { alpha: 0.0 }),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

/// Kernel calls made by [`Preconditioner::apply_into`] since setup.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ApplyStats {
    pub applies: usize,
    pub chol_solves: usize,
    pub spmv_a1: usize,
    pub spmv_a2: usize,
    pub spmv_t_a1: usize,
    pub spmv_t_a2: usize,
}

#[derive(Debug, Default)]
struct Counters {
    applies: AtomicUsize,
    chol_solves: AtomicUsize,
    spmv_a1: AtomicUsize,
    spmv_a2: AtomicUsize,
    spmv_t_a1: AtomicUsize,
    spmv_t_a2: AtomicUsize,
}

fn bump(c: &AtomicUsize) {
    c.fetch_add(1, Ordering::Relaxed);
}

/// A factored preconditioner bound to one problem.
#[derive(Debug)]
pub struct Preconditioner<'a> {
    kind: PrecondKind,
    factor: Option<CholeskyFactor>,
    a1: &'a SparseMatrix,
    a2: &'a SparseMatrix,
    counters: Counters,
}

/// Factors the inner matrix of `kind` for `prob`.
///
/// For `Palpha`, α must be finite and nonnegative; [`Error::NotSpd`] means
/// `α ≥ λ_min(S)`. For the baselines it means `A1` is rank deficient.
pub fn setup<'a>(kind: PrecondKind, prob: &'a IlsProblem) -> Result<Preconditioner<'a>> {
    let factor = match kind {
        PrecondKind::None => None,
        PrecondKind::Palpha { alpha } => {
            if !alpha.is_finite() || alpha < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "alpha must be finite and nonnegative, got {alpha}"
                )));
            }
            let mut shifted = prob.s().clone();
            shifted.shift_diagonal(-alpha);
            Some(cholesky(&shifted)?)
        }
        _ => Some(cholesky(&gram(prob.a1()))?),
    };
    Ok(Preconditioner {
        kind,
        factor,
        a1: prob.a1(),
        a2: prob.a2(),
        counters: Counters::default(),
    })
}

impl Preconditioner<'_> {
    pub fn kind(&self) -> PrecondKind {
        self.kind
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a1.nrows(), self.a1.ncols(), self.a2.nrows())
    }

    pub fn dim(&self) -> usize {
        let (p, n, q) = self.dims();
        p + n + q
    }

    /// Errors unless this preconditioner was built for `system`.
    pub fn check_system(&self, system: SystemKind) -> Result<()> {
        match self.kind.system() {
            Some(expected) if expected != system => Err(Error::IncompatibleSystem {
                precond: self.kind.name().to_string(),
                expected: expected.to_string(),
                found: system.to_string(),
            }),
            _ => Ok(()),
        }
    }

    pub fn stats(&self) -> ApplyStats {
        let c = &self.counters;
        let get = |a: &AtomicUsize| a.load(Ordering::Relaxed);
        ApplyStats {
            applies: get(&c.applies),
            chol_solves: get(&c.chol_solves),
            spmv_a1: get(&c.spmv_a1),
            spmv_a2: get(&c.spmv_a2),
            spmv_t_a1: get(&c.spmv_t_a1),
            spmv_t_a2: get(&c.spmv_t_a2),
        }
    }

    pub fn apply(&self, r: &BlockVector) -> Result<BlockVector> {
        let mut z = BlockVector::zeros(r.dims().0, r.dims().1, r.dims().2);
        self.apply_into(r.as_slice(), z.as_mut_slice())?;
        Ok(z)
    }

    /// `z = M⁻¹ r` by block elimination.
    pub fn apply_into(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        let (p, n, _) = self.dims();
        check_len("preconditioner input", self.dim(), r.len())?;
        check_len("preconditioner output", self.dim(), z.len())?;
        bump(&self.counters.applies);

        let (r1, rest) = r.split_at(p);
        let (r2, r3) = rest.split_at(n);
        let (z1, rest) = z.split_at_mut(p);
        let (z2, z3) = rest.split_at_mut(n);

        let gram_solve = |rhs: &mut [f64]| {
            bump(&self.counters.chol_solves);
            self.factor.as_ref().expect("factored at setup").solve_in_place(rhs);
        };

        match self.kind {
            PrecondKind::None => {
                z.copy_from_slice(r);
            }
            PrecondKind::Bs1 => {
                z1.copy_from_slice(r1);
                z2.copy_from_slice(r2);
                gram_solve(z2);
                z3.copy_from_slice(r3);
            }
            PrecondKind::Bs2 | PrecondKind::But => {
                z3.copy_from_slice(r3);
                z2.copy_from_slice(r2);
                bump(&self.counters.spmv_t_a2);
                self.a2.spmv_t_add(-1.0, z3, z2);
                gram_solve(z2);
                z1.copy_from_slice(r1);
                if self.kind == PrecondKind::But {
                    bump(&self.counters.spmv_a1);
                    self.a1.spmv_add(-1.0, z2, z1);
                }
            }
            PrecondKind::Bs3 => {
                z2.copy_from_slice(r2);
                gram_solve(z2);
                z1.copy_from_slice(r1);
                bump(&self.counters.spmv_a1);
                self.a1.spmv_add(-1.0, z2, z1);
                z3.copy_from_slice(r3);
            }
            PrecondKind::Palpha { .. } => {
                // (S − αI) z2 = A1ᵀr1 − A2ᵀr3 − r2
                for (zi, ri) in z2.iter_mut().zip(r2) {
                    *zi = -ri;
                }
                bump(&self.counters.spmv_t_a1);
                self.a1.spmv_t_add(1.0, r1, z2);
                bump(&self.counters.spmv_t_a2);
                self.a2.spmv_t_add(-1.0, r3, z2);
                gram_solve(z2);
                z1.copy_from_slice(r1);
                bump(&self.counters.spmv_a1);
                self.a1.spmv_add(-1.0, z2, z1);
                z3.copy_from_slice(r3);
                bump(&self.counters.spmv_a2);
                self.a2.spmv_add(-1.0, z2, z3);
            }
        }
        Ok(())
    }
}
