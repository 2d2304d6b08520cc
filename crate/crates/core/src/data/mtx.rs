//! Matrix Market files, plain vector files and the JSON QP manifest.
//!
//! A manifest looks like
//!
//! ```text
//! { "n": 2, "m": 1,
//!   "H": [[1, 0], [0, 1]],     // inline rows, a path to a .mtx file, or null
//!   "A": "a.mtx",
//!   "c": [0, 0], "b": [1],
//!   "lower": [0, null], "upper": null }   // null entries are unbounded
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{dims, invalid, Error, Result};
use crate::linalg::{DenseMatrix, Matrix, SparseMatrix};
use crate::problem::QpProblem;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column: 1,
        message: message.into(),
    }
}

/// Reads a real or integer Matrix Market file, general or symmetric.
/// Coordinate files load as sparse, array files as dense.
pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<Matrix> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(1, format!("not a Matrix Market header: '{header}'")));
    }
    let coordinate = match fields[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(1, format!("unsupported format '{other}'"))),
    };
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(parse_err(1, format!("unsupported field '{}'", fields[3])));
    }
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut data_lines = Vec::new();
    for (k, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        data_lines.push((k + 1, t.to_string()));
    }
    let mut it = data_lines.into_iter();
    let (size_line, size) = it.next().ok_or_else(|| parse_err(1, "missing size line"))?;
    let size: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(size_line, format!("bad size token '{t}'"))))
        .collect::<Result<_>>()?;

    let number = |line: usize, t: &str| -> Result<f64> {
        let v: f64 = t.parse().map_err(|_| parse_err(line, format!("bad number '{t}'")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(parse_err(line, "non-finite value"))
        }
    };

    if coordinate {
        let [rows, cols, nnz] = size[..] else {
            return Err(parse_err(size_line, "coordinate size line needs rows, cols, entries"));
        };
        let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
        let mut seen = 0;
        for (line, text) in it {
            let tok: Vec<&str> = text.split_whitespace().collect();
            if tok.len() != 3 {
                return Err(parse_err(line, "expected 'row col value'"));
            }
            let idx = |t: &str| -> Result<usize> {
                t.parse::<usize>()
                    .ok()
                    .filter(|&v| v >= 1)
                    .ok_or_else(|| parse_err(line, format!("bad index '{t}'")))
            };
            let (i, j, v) = (idx(tok[0])? - 1, idx(tok[1])? - 1, number(line, tok[2])?);
            if i >= rows || j >= cols {
                return Err(parse_err(line, format!("entry ({}, {}) outside {rows}x{cols}", i + 1, j + 1)));
            }
            triplets.push((i, j, v));
            if symmetric && i != j {
                triplets.push((j, i, v));
            }
            seen += 1;
        }
        if seen != nnz {
            return Err(parse_err(size_line, format!("declared {nnz} entries, found {seen}")));
        }
        Ok(Matrix::Sparse(SparseMatrix::from_triplets(rows, cols, &triplets)?))
    } else {
        let [rows, cols] = size[..] else {
            return Err(parse_err(size_line, "array size line needs rows, cols"));
        };
        let mut values = Vec::new();
        for (line, text) in it {
            for t in text.split_whitespace() {
                values.push(number(line, t)?);
            }
        }
        let mut data = vec![0.0; rows * cols];
        if symmetric {
            // Lower triangle, column-major.
            let want = rows * (rows + 1) / 2;
            if rows != cols || values.len() != want {
                return Err(parse_err(size_line, format!("symmetric array needs {want} values")));
            }
            let mut k = 0;
            for j in 0..cols {
                for i in j..rows {
                    data[i * cols + j] = values[k];
                    data[j * cols + i] = values[k];
                    k += 1;
                }
            }
        } else {
            if values.len() != rows * cols {
                return Err(parse_err(size_line, format!("expected {} values, found {}", rows * cols, values.len())));
            }
            for j in 0..cols {
                for i in 0..rows {
                    data[i * cols + j] = values[j * rows + i];
                }
            }
        }
        Ok(Matrix::Dense(DenseMatrix::new(rows, cols, data)?))
    }
}

/// Dense matrices are written as `array`, sparse ones as `coordinate`.
pub fn write_matrix_market<W: Write>(m: &Matrix, mut out: W) -> Result<()> {
    match m {
        Matrix::Dense(d) => {
            writeln!(out, "%%MatrixMarket matrix array real general")?;
            writeln!(out, "{} {}", d.rows(), d.cols())?;
            for j in 0..d.cols() {
                for i in 0..d.rows() {
                    writeln!(out, "{}", d.get(i, j))?;
                }
            }
        }
        Matrix::Sparse(s) => {
            writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
            writeln!(out, "{} {} {}", s.rows(), s.cols(), s.nnz())?;
            for j in 0..s.cols() {
                for (i, v) in s.col(j) {
                    writeln!(out, "{} {} {}", i + 1, j + 1, v)?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// One number per line; `inf` and `-inf` are accepted, NaN is not.
pub fn read_vector<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| parse_err(k + 1, format!("bad number '{t}'")))?;
        if v.is_nan() {
            return Err(parse_err(k + 1, "NaN is not allowed"));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_vector<W: Write>(v: &[f64], mut out: W) -> Result<()> {
    for x in v {
        writeln!(out, "{x}")?;
    }
    out.flush()?;
    Ok(())
}

/// Inline rows or a path to a Matrix Market file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Rows(Vec<Vec<f64>>),
    File(String),
}

/// On-disk description of a [`QpProblem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpManifest {
    pub n: usize,
    #[serde(default)]
    pub m: usize,
    #[serde(rename = "H", default)]
    pub h: Option<MatrixSource>,
    #[serde(rename = "A", default)]
    pub a: Option<MatrixSource>,
    pub c: Vec<f64>,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default)]
    pub lower: Option<Vec<Option<f64>>>,
    #[serde(default)]
    pub upper: Option<Vec<Option<f64>>>,
}

fn load_source(src: &MatrixSource, base: &Path, rows: usize, cols: usize, name: &str) -> Result<Matrix> {
    let m = match src {
        MatrixSource::Rows(r) if r.is_empty() => Matrix::Dense(DenseMatrix::zeros(0, cols)),
        MatrixSource::Rows(r) => Matrix::Dense(DenseMatrix::from_rows(r)?),
        MatrixSource::File(f) => read_matrix_market(BufReader::new(File::open(base.join(f))?))?,
    };
    if m.rows() != rows || m.cols() != cols {
        return Err(dims(format!(
            "{name} is {}x{}, manifest implies {rows}x{cols}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m)
}

fn bounds(v: &Option<Vec<Option<f64>>>, n: usize, missing: f64, name: &str) -> Result<Vec<f64>> {
    match v {
        None => Ok(vec![missing; n]),
        Some(v) if v.len() == n => Ok(v.iter().map(|x| x.unwrap_or(missing)).collect()),
        Some(v) => Err(dims(format!("{name} has {} entries, expected {n}", v.len()))),
    }
}

impl QpManifest {
    /// Builds the problem; relative matrix paths resolve against `base`.
    pub fn to_problem(&self, base: &Path) -> Result<QpProblem> {
        let (n, m) = (self.n, self.m);
        if self.c.len() != n {
            return Err(dims(format!("c has {} entries, expected n = {n}", self.c.len())));
        }
        if self.b.len() != m {
            return Err(dims(format!("b has {} entries, expected m = {m}", self.b.len())));
        }
        let h = self.h.as_ref().map(|s| load_source(s, base, n, n, "H")).transpose()?;
        let mut p = QpProblem::new(h, self.c.clone());
        match (&self.a, m) {
            (Some(src), _) => {
                let a = load_source(src, base, m, n, "A")?;
                p = p.with_constraints(a, self.b.clone());
            }
            (None, 0) => {}
            (None, _) => return Err(invalid("m > 0 but no A given")),
        }
        let lower = bounds(&self.lower, n, f64::NEG_INFINITY, "lower")?;
        let upper = bounds(&self.upper, n, f64::INFINITY, "upper")?;
        Ok(p.with_bounds(lower, upper))
    }

    /// Inline description of `p`.
    pub fn from_problem(p: &QpProblem) -> Self {
        let rows = |m: &Matrix| {
            MatrixSource::Rows((0..m.rows()).map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect()).collect())
        };
        let opt = |v: &[f64]| -> Option<Vec<Option<f64>>> {
            if v.iter().all(|x| x.is_infinite()) {
                None
            } else {
                Some(v.iter().map(|&x| x.is_finite().then_some(x)).collect())
            }
        };
        Self {
            n: p.n(),
            m: p.m(),
            h: p.h.as_ref().map(rows),
            a: p.a.as_ref().map(rows),
            c: p.c.clone(),
            b: p.b.clone(),
            lower: opt(&p.lower),
            upper: opt(&p.upper),
        }
    }
}

/// Loads a manifest file into a problem.
pub fn load_qp_manifest(path: &Path) -> Result<QpProblem> {
    let manifest: QpManifest = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    manifest.to_problem(base)
}

/// Writes `p` as an inline manifest.
pub fn write_qp_manifest(p: &QpProblem, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &QpManifest::from_problem(p))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}
