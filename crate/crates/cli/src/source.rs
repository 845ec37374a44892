use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::Args;
use ils_core::generate::{default_q, gen_sparse, gen_tls, TLS_EPS};
use ils_core::mtx::{read_mtx, read_vector};
use ils_core::precond::{DEFAULT_ALPHA_SPARSE, DEFAULT_ALPHA_TLS};
use ils_core::IlsProblem;

/// `p,q,n` for a total least squares instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TlsDims {
    pub p: usize,
    pub q: usize,
    pub n: usize,
}

impl FromStr for TlsDims {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<usize> = s
            .split([',', 'x'])
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("bad dimension `{t}` in `{s}`"))
            })
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [p, q, n] => Ok(Self { p, q, n }),
            _ => Err(format!("expected p,q,n, got `{s}`")),
        }
    }
}

impl fmt::Display for TlsDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.p, self.q, self.n)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Matrix Market file used as A1, with A2 = 0.3·eye(q, n) and uniform b
    #[arg(long)]
    pub mtx: Vec<PathBuf>,
    /// Rows of A2 for --mtx problems [default: ceil(p/4)]
    #[arg(long)]
    pub q: Option<usize>,
    /// Total least squares instance of size p,q,n
    #[arg(long)]
    pub tls: Vec<TlsDims>,
    /// Noise level for --tls problems
    #[arg(long, default_value_t = TLS_EPS)]
    pub eps: f64,
    /// Directory holding a1.mtx, a2.mtx, b1.mtx and b2.mtx
    #[arg(long)]
    pub problem_dir: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// A fully specified problem source.
#[derive(Debug, Clone)]
pub enum Source {
    Mtx { path: PathBuf, q: Option<usize> },
    Tls { dims: TlsDims, eps: f64 },
    Dir(PathBuf),
}

pub struct Loaded {
    pub problem: IlsProblem,
    pub descriptor: String,
    pub default_alpha: f64,
}

impl SourceArgs {
    /// Every requested source: sparse files first, then TLS sizes, then directories.
    pub fn all(&self) -> Vec<Source> {
        let mtx = self.mtx.iter().map(|path| Source::Mtx {
            path: path.clone(),
            q: self.q,
        });
        let tls = self.tls.iter().map(|&dims| Source::Tls { dims, eps: self.eps });
        let dirs = self.problem_dir.iter().cloned().map(Source::Dir);
        mtx.chain(tls).chain(dirs).collect()
    }

    pub fn single(&self) -> anyhow::Result<Source> {
        match <[Source; 1]>::try_from(self.all()) {
            Ok([s]) => Ok(s),
            Err(_) => bail!("exactly one of --mtx, --tls or --problem-dir is required"),
        }
    }
}

impl Source {
    pub fn load(&self, seed: u64) -> anyhow::Result<Loaded> {
        match self {
            Source::Mtx { path, q } => {
                let a1 = read_mtx(path).with_context(|| format!("reading {}", path.display()))?;
                let q = q.unwrap_or_else(|| default_q(a1.nrows()));
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Ok(Loaded {
                    problem: gen_sparse(a1, q, seed)?,
                    descriptor: format!("mtx:{name},q={q}"),
                    default_alpha: DEFAULT_ALPHA_SPARSE,
                })
            }
            Source::Tls { dims, eps } => Ok(Loaded {
                problem: gen_tls(dims.p, dims.q, dims.n, *eps, seed)?.problem,
                descriptor: format!("tls:{dims}"),
                default_alpha: DEFAULT_ALPHA_TLS,
            }),
            Source::Dir(dir) => Ok(Loaded {
                problem: load_dir(dir)?,
                descriptor: format!("dir:{}", dir.display()),
                default_alpha: DEFAULT_ALPHA_SPARSE,
            }),
        }
    }
}

pub const PROBLEM_FILES: [&str; 4] = ["a1.mtx", "a2.mtx", "b1.mtx", "b2.mtx"];

fn load_dir(dir: &Path) -> anyhow::Result<IlsProblem> {
    let file = |name: &str| dir.join(name);
    let ctx = |name: &str| format!("reading {}", file(name).display());
    let a1 = read_mtx(file("a1.mtx")).with_context(|| ctx("a1.mtx"))?;
    let a2 = read_mtx(file("a2.mtx")).with_context(|| ctx("a2.mtx"))?;
    let b1 = read_vector(file("b1.mtx")).with_context(|| ctx("b1.mtx"))?;
    let b2 = if a2.nrows() == 0 {
        Vec::new()
    } else {
        read_vector(file("b2.mtx")).with_context(|| ctx("b2.mtx"))?
    };
    Ok(IlsProblem::new(a1, a2, b1, b2)?)
}
