use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use ils_core::dense::jacobi_eigenvalues;
use ils_core::generate::{default_q, gen_sparse, gen_tls};
use ils_core::krylov::{gmres, spectral_radius_from, SolveReport, SolverConfig};
use ils_core::mtx::{fmt_f64, read_mtx, write_csv_to, write_mtx, write_vector, CsvRecord, RunReport};
use ils_core::precond::{setup, PrecondKind};
use ils_core::problem::{direct_oracle, relative_error, validate};
use ils_core::spectral::{dense_spectrum, preconditioned_spectrum, SpectrumPoint};
use ils_core::{Error, IlsProblem, SystemKind};
use serde::Serialize;

use crate::source::{Source, SourceArgs, PROBLEM_FILES};
use crate::{parse_system, NotConverged, OutArgs, SolverArgs};

/// Environment variable capping the dimension of dense-oracle spectra.
pub const ORACLE_CAP_VAR: &str = "ILS_ORACLE_CAP";
pub const DEFAULT_ORACLE_CAP: usize = 1500;

/// Outcome of one preconditioned solve.
struct Cell {
    report: SolveReport,
    x: Vec<f64>,
    err: Option<f64>,
    normal_res: f64,
    setup_seconds: f64,
}

impl Cell {
    fn total_seconds(&self) -> f64 {
        self.setup_seconds + self.report.wall_seconds
    }
}

/// Resolves the system to solve: the preconditioner's own, or `requested` for `None`.
fn system_for(kind: PrecondKind, requested: Option<SystemKind>) -> ils_core::Result<SystemKind> {
    match (kind.system(), requested) {
        (None, r) => Ok(r.unwrap_or(SystemKind::Unsym13)),
        (Some(own), Some(r)) if own != r => Err(Error::IncompatibleSystem {
            precond: kind.name().to_owned(),
            expected: own.to_string(),
            found: r.to_string(),
        }),
        (Some(own), _) => Ok(own),
    }
}

fn run_cell(
    prob: &IlsProblem,
    xref: &[f64],
    kind: PrecondKind,
    system: SystemKind,
    cfg: &SolverConfig,
) -> ils_core::Result<Cell> {
    let sys = prob.assemble(system);
    let start = Instant::now();
    let m = setup(kind, prob)?;
    m.check_system(system)?;
    let setup_seconds = start.elapsed().as_secs_f64();
    let (u, report) = gmres(&sys, &m, &prob.initial_guess(), cfg)?;
    let err = match relative_error(u.x(), xref) {
        Ok(e) => Some(e),
        Err(Error::ZeroNorm(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Cell {
        normal_res: prob.normal_residual(u.x())?,
        x: u.x().to_vec(),
        err,
        report,
        setup_seconds,
    })
}

fn open_out(out: &OutArgs) -> anyhow::Result<Box<dyn Write>> {
    Ok(match &out.out {
        Some(path) => Box::new(io::BufWriter::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn opt_field(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// none, bs1, bs2, bs3, but or palpha
    #[arg(long, default_value = "palpha")]
    method: String,
    /// unsym13 or spdblock14; only `none` may choose, the others are bound to one
    #[arg(long, value_parser = parse_system)]
    system: Option<SystemKind>,
    /// P(alpha) parameter [default: 1e-6 for --mtx, 1e-10 for --tls]
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Include the per-iteration residual history
    #[arg(long)]
    history: bool,
    /// Also write the x-block as a Matrix Market array file
    #[arg(long)]
    solution: Option<std::path::PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

pub fn solve(a: &SolveArgs) -> anyhow::Result<()> {
    let cfg = a.solver.config()?;
    let loaded = a.source.single()?.load(a.source.seed)?;
    let prob = &loaded.problem;
    let kind = PrecondKind::parse_with_alpha(&a.method, a.alpha.unwrap_or(loaded.default_alpha))?;
    let system = system_for(kind, a.system)?;
    let xref = direct_oracle(prob)?;
    let cell = run_cell(prob, &xref, kind, system, &cfg)?;

    let mut rep = RunReport::new(kind.name(), loaded.descriptor);
    rep.alpha = kind.alpha();
    rep.system = Some(system.to_string());
    rep.it = cell.report.iters;
    rep.res = cell.report.final_res;
    rep.err = cell.err;
    rep.wall_seconds = cell.report.wall_seconds;
    rep.setup_seconds = Some(cell.setup_seconds);
    rep.total_seconds = Some(cell.total_seconds());
    rep.converged = Some(cell.report.converged);
    rep.normal_residual = Some(cell.normal_res);
    rep.seed = Some(a.source.seed);
    if a.history {
        rep.res_history = cell.report.res_history.clone();
    }

    if let Some(path) = &a.solution {
        write_vector(&cell.x, path)?;
    }
    let mut w = open_out(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &rep)?;
    writeln!(w)?;
    w.flush()?;

    if !cell.report.converged {
        return Err(NotConverged(format!(
            "{} did not reach tol {:e} in {} iterations (res {:e})",
            kind.name(),
            cfg.tol,
            cell.report.iters,
            cell.report.final_res
        ))
        .into());
    }
    Ok(())
}

/// Which systems the unpreconditioned method runs on in a benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoneSystems {
    Unsym13,
    Spdblock14,
    Both,
}

impl NoneSystems {
    fn systems(self) -> &'static [SystemKind] {
        match self {
            NoneSystems::Unsym13 => &[SystemKind::Unsym13],
            NoneSystems::Spdblock14 => &[SystemKind::SpdBlock14],
            NoneSystems::Both => &[SystemKind::Unsym13, SystemKind::SpdBlock14],
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Comma-separated methods; an empty list writes only the header
    #[arg(long, default_value = "none,bs2,but,palpha")]
    methods: String,
    /// Systems for the unpreconditioned method
    #[arg(long, value_enum, default_value_t = NoneSystems::Unsym13)]
    system: NoneSystems,
    /// P(alpha) parameter [default: 1e-6 for --mtx, 1e-10 for --tls]
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Clone, Default)]
struct BenchRow {
    problem: String,
    method: String,
    system: String,
    alpha: Option<f64>,
    it: Option<usize>,
    res: Option<f64>,
    err: Option<f64>,
    normal_res: Option<f64>,
    setup_seconds: Option<f64>,
    iterate_seconds: Option<f64>,
    total_seconds: Option<f64>,
    converged: Option<bool>,
    status: String,
}

impl CsvRecord for BenchRow {
    fn header() -> &'static [&'static str] {
        &[
            "problem",
            "method",
            "system",
            "alpha",
            "it",
            "res",
            "err",
            "normal_res",
            "setup_seconds",
            "iterate_seconds",
            "total_seconds",
            "converged",
            "status",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.problem.clone(),
            self.method.clone(),
            self.system.clone(),
            opt_field(self.alpha),
            self.it.map(|i| i.to_string()).unwrap_or_default(),
            opt_field(self.res),
            opt_field(self.err),
            opt_field(self.normal_res),
            opt_field(self.setup_seconds),
            opt_field(self.iterate_seconds),
            opt_field(self.total_seconds),
            self.converged.map(|c| c.to_string()).unwrap_or_default(),
            self.status.clone(),
        ]
    }
}

fn parse_methods(list: &str) -> Vec<&str> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

pub fn bench(a: &BenchArgs) -> anyhow::Result<()> {
    let cfg = a.solver.config()?;
    let methods = parse_methods(&a.methods);
    let mut rows = Vec::new();
    if !methods.is_empty() {
        let sources = a.source.all();
        if sources.is_empty() {
            bail!("bench needs at least one --mtx, --tls or --problem-dir");
        }
        for src in &sources {
            bench_source(src, a, &methods, &cfg, &mut rows);
        }
    }
    let mut w = open_out(&a.out)?;
    write_csv_to(&rows, &mut w)?;
    w.flush()?;
    Ok(())
}

fn source_label(src: &Source) -> String {
    match src {
        Source::Mtx { path, .. } => format!("mtx:{}", path.display()),
        Source::Tls { dims, .. } => format!("tls:{dims}"),
        Source::Dir(dir) => format!("dir:{}", dir.display()),
    }
}

fn bench_source(src: &Source, a: &BenchArgs, methods: &[&str], cfg: &SolverConfig, rows: &mut Vec<BenchRow>) {
    let failed = |problem: String, method: &str, e: &dyn std::fmt::Display| BenchRow {
        problem,
        method: method.to_owned(),
        status: format!("error: {e}"),
        ..BenchRow::default()
    };
    let loaded = match src.load(a.source.seed) {
        Ok(l) => l,
        Err(e) => {
            rows.extend(methods.iter().map(|m| failed(source_label(src), m, &format!("{e:#}"))));
            return;
        }
    };
    let prob = &loaded.problem;
    let xref = match direct_oracle(prob) {
        Ok(x) => x,
        Err(e) => {
            rows.extend(methods.iter().map(|m| failed(loaded.descriptor.clone(), m, &e)));
            return;
        }
    };
    let alpha = a.alpha.unwrap_or(loaded.default_alpha);
    for &name in methods {
        let kind = match PrecondKind::parse_with_alpha(name, alpha) {
            Ok(k) => k,
            Err(e) => {
                rows.push(failed(loaded.descriptor.clone(), name, &e));
                continue;
            }
        };
        let systems = match kind.system() {
            Some(own) => vec![own],
            None => a.system.systems().to_vec(),
        };
        for system in systems {
            let mut row = BenchRow {
                problem: loaded.descriptor.clone(),
                method: kind.name().to_owned(),
                system: system.to_string(),
                alpha: kind.alpha(),
                ..BenchRow::default()
            };
            match run_cell(prob, &xref, kind, system, cfg) {
                Ok(c) => {
                    row.it = Some(c.report.iters);
                    row.res = Some(c.report.final_res);
                    row.err = c.err;
                    row.normal_res = Some(c.normal_res);
                    row.setup_seconds = Some(c.setup_seconds);
                    row.iterate_seconds = Some(c.report.wall_seconds);
                    row.total_seconds = Some(c.total_seconds());
                    row.converged = Some(c.report.converged);
                    row.status = if c.report.converged { "ok" } else { "not_converged" }.to_owned();
                }
                Err(e) => row.status = format!("error: {e}"),
            }
            rows.push(row);
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Comma-separated grid of alpha values
    #[arg(long, default_value = "1e-10,1e-8,1e-6,1e-4,1e-2")]
    alphas: String,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Clone, Default)]
struct SweepRow {
    alpha: f64,
    it: Option<usize>,
    res: Option<f64>,
    err: Option<f64>,
    setup_seconds: Option<f64>,
    iterate_seconds: Option<f64>,
    total_seconds: Option<f64>,
    converged: Option<bool>,
    rho: f64,
    flag: &'static str,
    status: String,
}

impl CsvRecord for SweepRow {
    fn header() -> &'static [&'static str] {
        &[
            "alpha",
            "it",
            "res",
            "err",
            "setup_seconds",
            "iterate_seconds",
            "total_seconds",
            "converged",
            "rho",
            "flag",
            "status",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            fmt_f64(self.alpha),
            self.it.map(|i| i.to_string()).unwrap_or_default(),
            opt_field(self.res),
            opt_field(self.err),
            opt_field(self.setup_seconds),
            opt_field(self.iterate_seconds),
            opt_field(self.total_seconds),
            self.converged.map(|c| c.to_string()).unwrap_or_default(),
            fmt_f64(self.rho),
            self.flag.to_owned(),
            self.status.clone(),
        ]
    }
}

fn parse_alphas(list: &str) -> anyhow::Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().with_context(|| format!("bad alpha `{s}`")))
        .collect()
}

/// Position of `alpha` relative to the splitting bound `λ_min/2` and to `λ_min`.
fn alpha_flag(alpha: f64, lambda_min: f64) -> &'static str {
    if alpha.is_nan() || alpha < 0.0 || alpha.is_infinite() {
        "invalid"
    } else if alpha >= lambda_min {
        "above_lambda_min"
    } else if alpha >= lambda_min / 2.0 {
        "above_alpha_max"
    } else {
        ""
    }
}

pub fn sweep_alpha(a: &SweepArgs) -> anyhow::Result<()> {
    let cfg = a.solver.config()?;
    let alphas = parse_alphas(&a.alphas).map_err(|e| Error::InvalidParameter(format!("{e:#}")))?;
    let loaded = a.source.single()?.load(a.source.seed)?;
    let prob = &loaded.problem;
    let mu = jacobi_eigenvalues(prob.s())?;
    let lambda_min = mu.first().copied().unwrap_or(f64::INFINITY);
    let xref = direct_oracle(prob)?;
    let rows: Vec<SweepRow> = alphas
        .iter()
        .map(|&alpha| {
            let mut row = SweepRow {
                alpha,
                rho: spectral_radius_from(&mu, alpha),
                flag: alpha_flag(alpha, lambda_min),
                ..SweepRow::default()
            };
            match run_cell(prob, &xref, PrecondKind::Palpha { alpha }, SystemKind::Unsym13, &cfg) {
                Ok(c) => {
                    row.it = Some(c.report.iters);
                    row.res = Some(c.report.final_res);
                    row.err = c.err;
                    row.setup_seconds = Some(c.setup_seconds);
                    row.iterate_seconds = Some(c.report.wall_seconds);
                    row.total_seconds = Some(c.total_seconds());
                    row.converged = Some(c.report.converged);
                    row.status = if c.report.converged { "ok" } else { "not_converged" }.to_owned();
                }
                Err(e) => row.status = format!("error: {e}"),
            }
            row
        })
        .collect();
    let mut w = open_out(&a.out)?;
    write_csv_to(&rows, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// P(alpha) parameter [default: 1e-6 for --mtx, 1e-10 for --tls]
    #[arg(long)]
    alpha: Option<f64>,
    /// Largest system dimension for the dense eigensolver paths
    #[arg(long, env = ORACLE_CAP_VAR, default_value_t = DEFAULT_ORACLE_CAP)]
    oracle_cap: usize,
    #[command(flatten)]
    out: OutArgs,
}

pub fn spectrum(a: &SpectrumArgs) -> anyhow::Result<()> {
    let loaded = a.source.single()?.load(a.source.seed)?;
    let prob = &loaded.problem;
    let alpha = a.alpha.unwrap_or(loaded.default_alpha);
    let mapped = preconditioned_spectrum(prob, alpha)?;
    eprintln!(
        "palpha alpha={alpha:e}: cluster radius {:e}{}",
        mapped.cluster_radius,
        if mapped.degenerate { " (degenerate)" } else { "" }
    );
    let mut points: Vec<SpectrumPoint> = mapped
        .full_spectrum()
        .into_iter()
        .map(|re| SpectrumPoint {
            re,
            im: 0.0,
            method: "palpha".to_owned(),
            alpha: Some(alpha),
        })
        .collect();

    if prob.dim() <= a.oracle_cap {
        let cases = [
            ("A", PrecondKind::None, SystemKind::Unsym13),
            ("Ahat", PrecondKind::None, SystemKind::SpdBlock14),
            ("bs2", PrecondKind::Bs2, SystemKind::SpdBlock14),
            ("but", PrecondKind::But, SystemKind::SpdBlock14),
            ("palpha-dense", PrecondKind::Palpha { alpha }, SystemKind::Unsym13),
        ];
        for (label, kind, system) in cases {
            let m = setup(kind, prob)?;
            let ev = dense_spectrum(&prob.assemble(system), &m)?;
            points.extend(ev.into_iter().map(|z| SpectrumPoint {
                re: z.re,
                im: z.im,
                method: label.to_owned(),
                alpha: kind.alpha(),
            }));
        }
    } else {
        eprintln!(
            "dimension {} exceeds the dense oracle cap {} ({ORACLE_CAP_VAR}); writing only the mapped spectrum",
            prob.dim(),
            a.oracle_cap
        );
    }
    let mut w = open_out(&a.out)?;
    write_csv_to(&points, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Output directory, created if missing
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum GenParams {
    Sparse {
        source: String,
        p: usize,
        q: usize,
        n: usize,
    },
    Tls {
        p: usize,
        q: usize,
        n: usize,
        eps: f64,
    },
}

#[derive(Debug, Serialize)]
struct Manifest {
    seed: u64,
    params: GenParams,
    files: [&'static str; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    lambda_min: f64,
    alpha_max: f64,
    s_spd: bool,
    a1_full_rank: bool,
}

pub fn generate(a: &GenerateArgs) -> anyhow::Result<()> {
    let seed = a.source.seed;
    let (prob, params, sigma) = match a.source.single()? {
        Source::Mtx { path, q } => {
            let a1 = read_mtx(&path).with_context(|| format!("reading {}", path.display()))?;
            let q = q.unwrap_or_else(|| default_q(a1.nrows()));
            let (p, n) = (a1.nrows(), a1.ncols());
            let source = path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            (gen_sparse(a1, q, seed)?, GenParams::Sparse { source, p, q, n }, None)
        }
        Source::Tls { dims, eps } => {
            let inst = gen_tls(dims.p, dims.q, dims.n, eps, seed)?;
            let params = GenParams::Tls {
                p: dims.p,
                q: dims.q,
                n: dims.n,
                eps,
            };
            (inst.problem, params, Some(inst.sigma))
        }
        Source::Dir(_) => bail!("generate needs --mtx or --tls"),
    };
    let report = validate(&prob);
    if !report.is_valid() {
        return Err(Error::Validation(format!(
            "generated problem is not solvable (S SPD: {}, A1 full rank: {})",
            report.s_spd, report.a1_full_rank
        ))
        .into());
    }
    write_problem(&prob, &a.out)?;
    let manifest = Manifest {
        seed,
        params,
        files: PROBLEM_FILES,
        sigma,
        lambda_min: report.lambda_min,
        alpha_max: report.alpha_max,
        s_spd: report.s_spd,
        a1_full_rank: report.a1_full_rank,
    };
    ils_core::mtx::write_report_json(&manifest, a.out.join("manifest.json"))?;
    Ok(())
}

fn write_problem(prob: &IlsProblem, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let [a1, a2, b1, b2] = PROBLEM_FILES.map(|f| dir.join(f));
    write_mtx(prob.a1(), a1)?;
    write_mtx(prob.a2(), a2)?;
    write_vector(prob.b1(), b1)?;
    write_vector(prob.b2(), b2)?;
    Ok(())
}
