//! Matrix Market input/output and CSV/JSON result files.
//!
//! Accepted Matrix Market headers are `matrix coordinate {real|integer} {general|symmetric}`
//! and `matrix array {real|integer} general`. Anything else is rejected with
//! [`Error::UnsupportedFormat`].

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtxFormat {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtxField {
    Real,
    Integer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtxSymmetry {
    General,
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MtxHeader {
    pub format: MtxFormat,
    pub field: MtxField,
    pub symmetry: MtxSymmetry,
}

impl MtxHeader {
    pub fn parse(line: &str) -> Result<Self> {
        let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
        let unsupported = || Error::UnsupportedFormat(line.trim().to_string());
        if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
            return Err(unsupported());
        }
        let format = match tokens[2].as_str() {
            "coordinate" => MtxFormat::Coordinate,
            "array" => MtxFormat::Array,
            _ => return Err(unsupported()),
        };
        let field = match tokens[3].as_str() {
            "real" | "double" => MtxField::Real,
            "integer" => MtxField::Integer,
            _ => return Err(unsupported()),
        };
        let symmetry = match tokens[4].as_str() {
            "general" => MtxSymmetry::General,
            "symmetric" if format == MtxFormat::Coordinate => MtxSymmetry::Symmetric,
            _ => return Err(unsupported()),
        };
        Ok(Self {
            format,
            field,
            symmetry,
        })
    }
}

struct Lines<'a> {
    path: String,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-blank, non-comment line with its 1-based number.
    fn next_data(&mut self) -> Option<(usize, &'a str)> {
        self.inner
            .by_ref()
            .map(|(i, l)| (i + 1, l.trim()))
            .find(|(_, l)| !l.is_empty() && !l.starts_with('%'))
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn numbers<T: std::str::FromStr>(&self, line: usize, text: &str, count: usize) -> Result<Vec<T>> {
        let out: Vec<T> = text
            .split_whitespace()
            .map(|t| {
                t.parse::<T>()
                    .map_err(|_| self.err(line, format!("cannot parse `{t}`")))
            })
            .collect::<Result<_>>()?;
        if out.len() != count {
            return Err(self.err(line, format!("expected {count} fields, found {}", out.len())));
        }
        Ok(out)
    }
}

fn parse_mtx(text: &str, path: &str) -> Result<SparseMatrix> {
    let mut lines = Lines {
        path: path.to_string(),
        inner: text.lines().enumerate(),
    };
    let header_line = text.lines().next().ok_or_else(|| lines.err(1, "empty file"))?;
    let header = MtxHeader::parse(header_line)?;
    lines.inner.next();

    let (size_line, size_text) = lines.next_data().ok_or_else(|| lines.err(1, "missing size line"))?;
    match header.format {
        MtxFormat::Coordinate => {
            let dims: Vec<usize> = lines.numbers(size_line, size_text, 3)?;
            let (nrows, ncols, nnz) = (dims[0], dims[1], dims[2]);
            if header.symmetry == MtxSymmetry::Symmetric && nrows != ncols {
                return Err(lines.err(size_line, "symmetric matrix must be square"));
            }
            let mut entries = Vec::with_capacity(nnz * 2);
            for k in 0..nnz {
                let (ln, t) = lines
                    .next_data()
                    .ok_or_else(|| lines.err(size_line, format!("expected {nnz} entries, found {k}")))?;
                let mut it = t.split_whitespace();
                let (Some(si), Some(sj), Some(sv), None) = (it.next(), it.next(), it.next(), it.next()) else {
                    return Err(lines.err(ln, "expected `row col value`"));
                };
                let parse_idx = |s: &str, bound: usize| -> Result<usize> {
                    let v: usize = s
                        .parse()
                        .map_err(|_| lines.err(ln, format!("cannot parse index `{s}`")))?;
                    if v == 0 || v > bound {
                        return Err(lines.err(ln, format!("index {v} outside 1..={bound}")));
                    }
                    Ok(v - 1)
                };
                let i = parse_idx(si, nrows)?;
                let j = parse_idx(sj, ncols)?;
                let v: f64 = sv
                    .parse()
                    .map_err(|_| lines.err(ln, format!("cannot parse value `{sv}`")))?;
                entries.push((i, j, v));
                if header.symmetry == MtxSymmetry::Symmetric && i != j {
                    entries.push((j, i, v));
                }
            }
            if let Some((ln, _)) = lines.next_data() {
                return Err(lines.err(ln, format!("more than the declared {nnz} entries")));
            }
            SparseMatrix::from_triplets(nrows, ncols, &entries)
        }
        MtxFormat::Array => {
            let dims: Vec<usize> = lines.numbers(size_line, size_text, 2)?;
            let (nrows, ncols) = (dims[0], dims[1]);
            let total = nrows * ncols;
            let mut entries = Vec::with_capacity(total);
            for k in 0..total {
                let (ln, t) = lines
                    .next_data()
                    .ok_or_else(|| lines.err(size_line, format!("expected {total} values, found {k}")))?;
                let v: Vec<f64> = lines.numbers(ln, t, 1)?;
                // column-major order
                entries.push((k % nrows, k / nrows, v[0]));
            }
            if let Some((ln, _)) = lines.next_data() {
                return Err(lines.err(ln, format!("more than the declared {total} values")));
            }
            SparseMatrix::from_triplets(nrows, ncols, &entries)
        }
    }
}

/// Reads a Matrix Market file into CSR, expanding symmetric storage.
pub fn read_mtx(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    parse_mtx(&fs::read_to_string(path)?, &path.display().to_string())
}

/// Reads an `n×1` Matrix Market file (array or coordinate) as a dense vector.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let m = read_mtx(path)?;
    if m.ncols() != 1 {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: format!("expected a single column, found {}", m.ncols()),
        });
    }
    Ok(m.to_dense().column(0))
}

/// Writes `m` as `matrix coordinate real general` with round-trippable values.
pub fn write_mtx(m: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(w, "{} {} {}", i + 1, j + 1, fmt_f64(v))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `v` as an `n×1` `matrix array real general` file.
pub fn write_vector(v: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v {
        writeln!(w, "{}", fmt_f64(*x))?;
    }
    w.flush()?;
    Ok(())
}

/// Scientific notation with 17 significant digits; parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A row type for [`write_csv`].
pub trait CsvRecord {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

pub fn write_csv<R: CsvRecord>(rows: &[R], path: impl AsRef<Path>) -> Result<()> {
    write_csv_to(rows, File::create(path)?)
}

pub fn write_csv_to<R: CsvRecord, W: Write>(rows: &[R], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(R::header())?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

/// JSON summary of one solve. `err` is `None` when no reference solution exists and
/// `alpha` is `None` for methods without a parameter; both serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: String,
    pub alpha: Option<f64>,
    pub problem: String,
    pub it: usize,
    pub res: f64,
    pub err: Option<f64>,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setup_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub res_history: Vec<f64>,
}

impl RunReport {
    pub fn new(method: impl Into<String>, problem: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            alpha: None,
            problem: problem.into(),
            it: 0,
            res: f64::NAN,
            err: None,
            wall_seconds: 0.0,
            system: None,
            converged: None,
            setup_seconds: None,
            total_seconds: None,
            normal_residual: None,
            seed: None,
            res_history: Vec::new(),
        }
    }
}

pub fn write_report_json<T: Serialize>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
