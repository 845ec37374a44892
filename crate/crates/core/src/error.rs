use thiserror::Error;

/// Errors produced by the sparse/dense kernels, problem assembly, solvers and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("entry ({row}, {col}) is out of range for a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    /// Cholesky met a pivot at or below the relative pivot tolerance.
    #[error("matrix is not symmetric positive definite (pivot {index} = {pivot:e})")]
    NotSpd { index: usize, pivot: f64 },

    #[error("matrix is numerically rank deficient")]
    RankDeficient,

    #[error("{algorithm} did not converge within {iterations} iterations")]
    NoConvergence { algorithm: &'static str, iterations: usize },

    #[error("invalid problem: {0}")]
    Validation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0} has zero norm")]
    ZeroNorm(&'static str),

    #[error("preconditioner {precond} is bound to system {expected}, not {found}")]
    IncompatibleSystem {
        precond: String,
        expected: String,
        found: String,
    },

    /// Arnoldi produced a (near) zero vector but the true residual is still above tolerance.
    #[error("GMRES breakdown at iteration {iteration}: true residual {residual:e} above tolerance")]
    Breakdown { iteration: usize, residual: f64 },

    #[error("problem generation failed: {0}")]
    Generation(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("unsupported Matrix Market header: {0}")]
    UnsupportedFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
