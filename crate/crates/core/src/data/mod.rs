//! Datasets, the LIBSVM text format, Matrix Market problem files and the
//! synthetic generators.

mod gen;
mod libsvm;
mod mtx;
pub mod store;

pub use gen::{gen_blobs, gen_qp, gen_regression, GeneratorManifest};
pub use libsvm::{parse_libsvm, write_libsvm};
pub use mtx::{
    load_qp_manifest, read_matrix_market, read_vector, write_matrix_market, write_qp_manifest,
    write_vector, MatrixSource, QpManifest,
};

use crate::error::{dims, invalid, Result};
use crate::linalg::{DenseMatrix, Matrix, SparseMatrix};

/// `n` observations of `p` features with one target each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(dims(format!("{} rows but {} targets", x.rows(), y.len())));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn feature_count(&self) -> usize {
        self.x.cols()
    }

    /// Checks every target is exactly `−1` or `+1`.
    pub fn check_binary(&self) -> Result<()> {
        match self.y.iter().position(|&v| v != 1.0 && v != -1.0) {
            Some(i) => Err(invalid(format!(
                "label {} on row {} is not -1 or +1",
                self.y[i],
                i + 1
            ))),
            None => Ok(()),
        }
    }

    /// Row `i` as a dense vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        dense_row(&self.x, i)
    }

    /// Every row as `(column, value)` pairs, zeros omitted.
    pub fn sparse_rows(&self) -> Vec<Vec<(usize, f64)>> {
        sparse_rows(&self.x)
    }

    /// Keeps the rows listed in `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let rows = self.sparse_rows();
        let picked: Vec<Vec<(usize, f64)>> = idx.iter().map(|&i| rows[i].clone()).collect();
        let x = match &self.x {
            Matrix::Dense(_) => {
                let p = self.feature_count();
                let mut data = vec![0.0; idx.len() * p];
                for (r, row) in picked.iter().enumerate() {
                    for &(c, v) in row {
                        data[r * p + c] = v;
                    }
                }
                Matrix::Dense(DenseMatrix::new(idx.len(), p, data).expect("sizes agree"))
            }
            Matrix::Sparse(_) => Matrix::Sparse(
                sparse_from_rows(idx.len(), self.feature_count(), &picked).expect("valid rows"),
            ),
        };
        Dataset {
            x,
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

pub(crate) fn dense_row(x: &Matrix, i: usize) -> Vec<f64> {
    match x {
        Matrix::Dense(d) => d.row(i).to_vec(),
        Matrix::Sparse(s) => {
            let mut out = vec![0.0; s.cols()];
            for (j, o) in out.iter_mut().enumerate() {
                *o = s.get(i, j);
            }
            out
        }
    }
}

pub(crate) fn sparse_rows(x: &Matrix) -> Vec<Vec<(usize, f64)>> {
    let mut rows = vec![Vec::new(); x.rows()];
    match x {
        Matrix::Dense(d) => {
            for (i, row) in rows.iter_mut().enumerate() {
                for (j, &v) in d.row(i).iter().enumerate() {
                    if v != 0.0 {
                        row.push((j, v));
                    }
                }
            }
        }
        Matrix::Sparse(s) => {
            for j in 0..s.cols() {
                for (i, v) in s.col(j) {
                    if v != 0.0 {
                        rows[i].push((j, v));
                    }
                }
            }
        }
    }
    rows
}

pub(crate) fn sparse_from_rows(
    n: usize,
    p: usize,
    rows: &[Vec<(usize, f64)>],
) -> Result<SparseMatrix> {
    let triplets: Vec<(usize, usize, f64)> = rows
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().map(move |&(j, v)| (i, j, v)))
        .collect();
    SparseMatrix::from_triplets(n, p, &triplets)
}
