//! LIBSVM sparse text format: `<label> <index>:<value> …`, one observation
//! per line, 1-based strictly increasing indices.
//!
//! The canonical form written here uses Rust's shortest round-trip decimal
//! formatting, single spaces, omits zero values and ends every line with
//! `\n`. Comment lines (`#…`) are rejected.

use std::io::{BufRead, Write};

use super::{sparse_from_rows, sparse_rows, Dataset};
use crate::error::{Error, Result};

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Reads a dataset. `feature_count = max(declared, largest index seen)`.
pub fn parse_libsvm<R: BufRead>(reader: R, declared_features: Option<usize>) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;

    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        if line.trim_start().starts_with('#') {
            return Err(parse_err(lineno, 1, "comment lines are not part of the format"));
        }
        let mut tokens = tokens_with_columns(line);
        let (col, label_tok) = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(lineno, col, format!("malformed label '{label_tok}'")))?;
        if !label.is_finite() {
            return Err(parse_err(lineno, col, "non-finite label"));
        }

        let mut row = Vec::new();
        let mut last: Option<usize> = None;
        for (col, tok) in tokens {
            let (idx_tok, val_tok) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, col, format!("expected index:value, got '{tok}'")))?;
            let idx: i64 = idx_tok
                .parse()
                .map_err(|_| parse_err(lineno, col, format!("malformed index '{idx_tok}'")))?;
            if idx <= 0 {
                return Err(parse_err(lineno, col, format!("index {idx} is not positive")));
            }
            let idx = idx as usize;
            let val_col = col + idx_tok.len() + 1;
            let val: f64 = val_tok
                .parse()
                .map_err(|_| parse_err(lineno, val_col, format!("malformed value '{val_tok}'")))?;
            if !val.is_finite() {
                return Err(parse_err(lineno, val_col, "non-finite value"));
            }
            if let Some(prev) = last {
                if idx == prev {
                    return Err(parse_err(lineno, col, format!("duplicate index {idx}")));
                }
                if idx < prev {
                    return Err(parse_err(
                        lineno,
                        col,
                        format!("index {idx} follows {prev}; indices must increase"),
                    ));
                }
            }
            last = Some(idx);
            max_index = max_index.max(idx);
            if val != 0.0 {
                row.push((idx - 1, val));
            }
        }
        labels.push(label);
        rows.push(row);
    }

    let p = max_index.max(declared_features.unwrap_or(0));
    let x = sparse_from_rows(labels.len(), p, &rows)?;
    Dataset::new(x.into(), labels)
}

/// Whitespace-separated tokens with their 1-based starting column.
fn tokens_with_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut offset = 0usize;
    std::iter::from_fn(move || {
        let trimmed = rest.trim_start();
        offset += rest.len() - trimmed.len();
        if trimmed.is_empty() {
            return None;
        }
        let end = trimmed.find(char::is_whitespace).unwrap_or(trimmed.len());
        let tok = &trimmed[..end];
        let col = offset + 1;
        offset += end;
        rest = &trimmed[end..];
        Some((col, tok))
    })
}

/// Writes the canonical form.
pub fn write_libsvm<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    let rows = sparse_rows(&dataset.x);
    let mut line = String::new();
    for (label, row) in dataset.y.iter().zip(&rows) {
        line.clear();
        line.push_str(&label.to_string());
        for &(j, v) in row {
            line.push(' ');
            line.push_str(&(j + 1).to_string());
            line.push(':');
            line.push_str(&v.to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseMatrix, Matrix};
    use crate::partition::rng_from_seed;
    use rand::Rng;

    fn parse(s: &str) -> Result<Dataset> {
        parse_libsvm(s.as_bytes(), None)
    }

    fn write(d: &Dataset) -> String {
        let mut buf = Vec::new();
        write_libsvm(d, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn reads_one_row() {
        let d = parse("+1 1:0.5 3:2.0\n").unwrap();
        assert_eq!(d.y, vec![1.0]);
        assert_eq!(d.feature_count(), 3);
        assert_eq!(d.row(0), vec![0.5, 0.0, 2.0]);
    }

    #[test]
    fn empty_stream() {
        let d = parse("").unwrap();
        assert_eq!((d.n(), d.feature_count()), (0, 0));
        let d = parse_libsvm("".as_bytes(), Some(7)).unwrap();
        assert_eq!(d.feature_count(), 7);
    }

    #[test]
    fn declared_features_widen() {
        let d = parse_libsvm("1 2:1\n".as_bytes(), Some(5)).unwrap();
        assert_eq!(d.feature_count(), 5);
        let d = parse_libsvm("1 9:1\n".as_bytes(), Some(5)).unwrap();
        assert_eq!(d.feature_count(), 9);
    }

    #[test]
    fn writes_canonical_form() {
        let x = DenseMatrix::from_rows(&[vec![0.5, 0.0, 2.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let d = Dataset::new(x.into(), vec![1.0, -1.0]).unwrap();
        assert_eq!(write(&d), "1 1:0.5 3:2\n-1\n");
    }

    fn expect_error(input: &str, line: usize, column: usize, needle: &str) {
        match parse(input) {
            Err(Error::Parse { line: l, column: c, message }) => {
                assert_eq!((l, c), (line, column), "{message}");
                assert!(message.contains(needle), "{message}");
            }
            other => panic!("expected parse error for {input:?}, got {other:?}"),
        }
    }

    #[test]
    fn documented_malformations() {
        expect_error("1 1:1\n1 0:1\n", 2, 3, "not positive");
        expect_error("1 -2:1\n", 1, 3, "not positive");
        expect_error("1 2:1 2:3\n", 1, 7, "duplicate");
        expect_error("1 3:1 2:3\n", 1, 7, "increase");
        expect_error("1 1:nan\n", 1, 5, "non-finite");
        expect_error("1 1:inf\n", 1, 5, "non-finite");
        expect_error("1 1:abc\n", 1, 5, "malformed value");
        expect_error("1 x:1\n", 1, 3, "malformed index");
        expect_error("1 12\n", 1, 3, "index:value");
        expect_error("one 1:1\n", 1, 1, "malformed label");
        expect_error("# header\n1 1:1\n", 1, 1, "comment");
        expect_error("1 1:1\n\n  1 2:1 2:1", 3, 9, "duplicate");
    }

    fn random_canonical(seed: u64) -> (Dataset, String) {
        let mut rng = rng_from_seed(seed);
        let n = rng.gen_range(0..12u64) as usize;
        let p = rng.gen_range(1..15u64) as usize;
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let mut row = Vec::new();
            for j in 0..p {
                if rng.gen_bool(0.3) {
                    let v = match rng.gen_range(0..4u64) {
                        0 => rng.gen_range(-5..6i64) as f64,
                        1 => rng.gen_range(-1.0..1.0),
                        2 => rng.gen_range(-1e6..1e6),
                        _ => rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-30..30)),
                    };
                    if v != 0.0 {
                        row.push((j, v));
                    }
                }
            }
            rows.push(row);
            y.push(if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(-3.0..3.0) });
        }
        let x = sparse_from_rows(n, p, &rows).unwrap();
        let d = Dataset::new(Matrix::Sparse(x), y).unwrap();
        let text = write(&d);
        (d, text)
    }

    #[test]
    fn round_trips_on_generated_files() {
        for seed in 0..1000 {
            let (d, text) = random_canonical(seed);
            let parsed = parse_libsvm(text.as_bytes(), Some(d.feature_count())).unwrap();
            assert_eq!(parsed, d, "parse(write(d)) != d for seed {seed}");
            assert_eq!(write(&parsed), text, "write(parse(f)) != f for seed {seed}");
        }
    }
}
