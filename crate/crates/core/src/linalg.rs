//! Dense and column-compressed matrix storage.
//!
//! The solvers only ever touch matrices through column-oriented kernels
//! (`col_dot`, `col_axpy`, `col_col_dot`) and small gathers, so both storage
//! kinds expose the same surface through [`Matrix`].

use nalgebra::DMatrix;

use crate::error::{dims, invalid, Result};

/// Row-major dense matrix of finite `f64`s.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(dims(format!(
                "dense {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(dims("ragged rows"));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Result<Self> {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self::new(m.nrows(), m.ncols(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Column-compressed sparse matrix.
///
/// Row indices are strictly increasing inside every column and all stored
/// values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from raw CSC arrays, checking every storage invariant.
    pub fn new(
        rows: usize,
        cols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if col_ptr.len() != cols + 1 || col_ptr[0] != 0 {
            return Err(dims("column pointer array must have cols+1 entries starting at 0"));
        }
        if row_idx.len() != values.len() || *col_ptr.last().unwrap() != values.len() {
            return Err(dims("row index / value arrays disagree with column pointers"));
        }
        for j in 0..cols {
            let (start, end) = (col_ptr[j], col_ptr[j + 1]);
            if start > end {
                return Err(invalid(format!("column pointers decrease at column {j}")));
            }
            let col = &row_idx[start..end];
            for (k, &r) in col.iter().enumerate() {
                if r >= rows {
                    return Err(invalid(format!("row index {r} out of range in column {j}")));
                }
                if k > 0 && col[k - 1] >= r {
                    return Err(invalid(format!(
                        "row indices not strictly increasing in column {j}"
                    )));
                }
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite stored value at position {pos}")));
        }
        Ok(Self {
            rows,
            cols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Builds from (row, col, value) triplets in any order. Duplicates are
    /// rejected rather than summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r >= rows || c >= cols {
                return Err(invalid(format!("triplet ({r}, {c}) outside {rows}x{cols}")));
            }
        }
        sorted.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
            return Err(invalid(format!("duplicate entry at ({}, {})", w[0].0, w[0].1)));
        }
        let mut col_ptr = vec![0usize; cols + 1];
        for &(_, c, _) in &sorted {
            col_ptr[c + 1] += 1;
        }
        for j in 0..cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let row_idx = sorted.iter().map(|t| t.0).collect();
        let values = sorted.iter().map(|t| t.2).collect();
        Self::new(rows, cols, col_ptr, row_idx, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored (row, value) pairs of column `j`.
    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        match self.row_idx[range.clone()].binary_search(&i) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Either storage kind behind a common column-oriented interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
}

impl From<DenseMatrix> for Matrix {
    fn from(m: DenseMatrix) -> Self {
        Matrix::Dense(m)
    }
}

impl From<SparseMatrix> for Matrix {
    fn from(m: SparseMatrix) -> Self {
        Matrix::Sparse(m)
    }
}

impl Matrix {
    pub fn rows(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.rows(),
            Matrix::Sparse(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.cols(),
            Matrix::Sparse(m) => m.cols(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Matrix::Dense(m) => m.get(i, j),
            Matrix::Sparse(m) => m.get(i, j),
        }
    }

    /// Number of explicitly stored entries (all entries for dense storage).
    pub fn stored(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.rows() * m.cols(),
            Matrix::Sparse(m) => m.nnz(),
        }
    }

    /// Fraction of nonzero entries.
    pub fn density(&self) -> f64 {
        let total = (self.rows() * self.cols()) as f64;
        if total == 0.0 {
            return 0.0;
        }
        let nz = match self {
            Matrix::Dense(m) => m.as_slice().iter().filter(|v| **v != 0.0).count(),
            Matrix::Sparse(m) => m.values().iter().filter(|v| **v != 0.0).count(),
        };
        nz as f64 / total
    }

    /// `Σ_i M[i, j] · v[i]`
    pub fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        match self {
            Matrix::Dense(m) => (0..m.rows()).map(|i| m.get(i, j) * v[i]).sum(),
            Matrix::Sparse(m) => m.col(j).map(|(i, a)| a * v[i]).sum(),
        }
    }

    /// `out += alpha · M[:, j]`
    pub fn col_axpy(&self, j: usize, alpha: f64, out: &mut [f64]) {
        if alpha == 0.0 {
            return;
        }
        match self {
            Matrix::Dense(m) => {
                for (i, o) in out.iter_mut().enumerate().take(m.rows()) {
                    *o += alpha * m.get(i, j);
                }
            }
            Matrix::Sparse(m) => {
                for (i, a) in m.col(j) {
                    out[i] += alpha * a;
                }
            }
        }
    }

    /// `M[:, i] · M[:, j]`
    pub fn col_col_dot(&self, i: usize, j: usize) -> f64 {
        match self {
            Matrix::Dense(m) => (0..m.rows()).map(|r| m.get(r, i) * m.get(r, j)).sum(),
            Matrix::Sparse(m) => {
                let mut a = m.col(i).peekable();
                let mut b = m.col(j).peekable();
                let mut acc = 0.0;
                while let (Some(&(ra, va)), Some(&(rb, vb))) = (a.peek(), b.peek()) {
                    match ra.cmp(&rb) {
                        std::cmp::Ordering::Less => {
                            a.next();
                        }
                        std::cmp::Ordering::Greater => {
                            b.next();
                        }
                        std::cmp::Ordering::Equal => {
                            acc += va * vb;
                            a.next();
                            b.next();
                        }
                    }
                }
                acc
            }
        }
    }

    /// `out = M x`
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self {
            Matrix::Dense(m) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = m.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
            Matrix::Sparse(_) => {
                for (j, &xj) in x.iter().enumerate() {
                    self.col_axpy(j, xj, out);
                }
            }
        }
    }

    /// `out = Mᵀ y`
    pub fn tr_mul_vec(&self, y: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.col_dot(j, y);
        }
    }

    /// Gathers `M[rows, cols]` into a dense matrix.
    pub fn gather(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| self.get(rows[a], cols[b]))
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows(), self.cols());
        match self {
            Matrix::Dense(m) => {
                for i in 0..m.rows() {
                    for j in 0..m.cols() {
                        out[(i, j)] = m.get(i, j);
                    }
                }
            }
            Matrix::Sparse(m) => {
                for j in 0..m.cols() {
                    for (i, v) in m.col(j) {
                        out[(i, j)] = v;
                    }
                }
            }
        }
        out
    }

    /// Largest `|M[i,j] − M[j,i]|` relative to the largest magnitude entry.
    pub fn asymmetry(&self) -> f64 {
        if self.rows() != self.cols() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        match self {
            Matrix::Dense(m) => {
                for i in 0..n {
                    for j in 0..n {
                        scale = scale.max(m.get(i, j).abs());
                        worst = worst.max((m.get(i, j) - m.get(j, i)).abs());
                    }
                }
            }
            Matrix::Sparse(m) => {
                for j in 0..n {
                    for (i, v) in m.col(j) {
                        scale = scale.max(v.abs());
                        worst = worst.max((v - m.get(j, i)).abs());
                    }
                }
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn norm_1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (Matrix, Matrix) {
        let dense = DenseMatrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 0.0]]).unwrap();
        let sparse =
            SparseMatrix::from_triplets(2, 3, &[(1, 1, 3.0), (0, 0, 1.0), (0, 2, 2.0)]).unwrap();
        (dense.into(), sparse.into())
    }

    #[test]
    fn dense_and_sparse_agree() {
        let (d, s) = sample();
        let x = [1.0, -2.0, 0.5];
        let (mut od, mut os) = (vec![0.0; 2], vec![0.0; 2]);
        d.mul_vec(&x, &mut od);
        s.mul_vec(&x, &mut os);
        assert_eq!(od, vec![2.0, -6.0]);
        assert_eq!(od, os);
        let y = [1.0, 2.0];
        let (mut td, mut ts) = (vec![0.0; 3], vec![0.0; 3]);
        d.tr_mul_vec(&y, &mut td);
        s.tr_mul_vec(&y, &mut ts);
        assert_eq!(td, vec![1.0, 6.0, 2.0]);
        assert_eq!(td, ts);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d.col_col_dot(i, j), s.col_col_dot(i, j));
            }
        }
        assert_eq!(d.to_nalgebra(), s.to_nalgebra());
    }

    #[test]
    fn sparse_rejects_bad_storage() {
        assert!(SparseMatrix::new(2, 1, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::new(2, 1, vec![0, 2], vec![0, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::new(2, 1, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(SparseMatrix::new(2, 1, vec![0, 1], vec![0], vec![f64::NAN]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0)]).is_err());
    }

    #[test]
    fn dense_rejects_non_finite() {
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn asymmetry_detects_skew() {
        let m: Matrix = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]])
            .unwrap()
            .into();
        assert!(m.asymmetry() > 0.5);
        let s: Matrix = DenseMatrix::identity(3).into();
        assert_eq!(s.asymmetry(), 0.0);
    }
}
