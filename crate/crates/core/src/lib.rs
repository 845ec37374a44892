//! Sparse solvers for indefinite least squares problems
//! `min (b − Ax)ᵀ J (b − Ax)`, `J = diag(I_p, −I_q)`.
//!
//! The problem is rewritten as a block three-by-three linear system in the unknowns
//! `(δ1; x; δ2)` with `δ = b − Ax` and solved by left-preconditioned GMRES. The
//! parameterized preconditioner [`precond::PrecondKind::Palpha`] replaces the zero
//! middle block of the unsymmetric system by `αI`; the block-diagonal and
//! block-triangular baselines act on the system with the `A1ᵀA1` middle block.

pub mod dense;
pub mod error;
pub mod generate;
pub mod krylov;
pub mod mtx;
pub mod precond;
pub mod problem;
pub mod sparse;
pub mod spectral;
pub mod vector;

pub use dense::{DenseMatrix, SymEigen};
pub use error::{Error, Result};
pub use problem::{BlockSystem, BlockVector, IlsProblem, SystemKind};
pub use sparse::SparseMatrix;
