//! Kernels and the label-signed kernel matrix `q_ij = y_i y_j K(x_i, x_j)`,
//! evaluated on demand from the data rows.

use std::num::NonZeroUsize;

use lru::LruCache;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::engine::QuadraticTerm;
use crate::error::{dims, invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `exp(−‖x − x'‖² / (2σ²))`
    Gaussian { sigma: f64 },
    /// `xᵀx'`
    Linear,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(invalid(format!("sigma must be positive, got {sigma}")))
            }
            _ => Ok(()),
        }
    }

    /// Kernel value on two rows given as ascending `(index, value)` lists.
    pub(crate) fn eval_sparse(&self, a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
        match *self {
            KernelSpec::Gaussian { sigma } => (-sq_dist(a, b) / (2.0 * sigma * sigma)).exp(),
            KernelSpec::Linear => sparse_dot(a, b),
        }
    }
}

/// `K(x_i, x_j)` on dense vectors.
pub fn kernel_eval(xi: &[f64], xj: &[f64], k: &KernelSpec) -> Result<f64> {
    if xi.len() != xj.len() {
        return Err(dims(format!("kernel arguments have lengths {} and {}", xi.len(), xj.len())));
    }
    Ok(match *k {
        KernelSpec::Gaussian { sigma } => {
            let d: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d / (2.0 * sigma * sigma)).exp()
        }
        KernelSpec::Linear => xi.iter().zip(xj).map(|(a, b)| a * b).sum(),
    })
}

fn sq_dist(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let (ia, va) = a[i];
        let (ib, vb) = b[j];
        let d = if ia == ib {
            i += 1;
            j += 1;
            va - vb
        } else if ia < ib {
            i += 1;
            va
        } else {
            j += 1;
            vb
        };
        s += d * d;
    }
    s + a[i..].iter().map(|(_, v)| v * v).sum::<f64>() + b[j..].iter().map(|(_, v)| v * v).sum::<f64>()
}

fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    s
}

/// `Q[block, block]` computed directly from the rows.
pub fn assemble_kernel_block(
    rows: &[Vec<(usize, f64)>],
    y: &[f64],
    block: &[usize],
    k: &KernelSpec,
) -> Result<DMatrix<f64>> {
    if rows.len() != y.len() {
        return Err(dims(format!("{} rows but {} labels", rows.len(), y.len())));
    }
    if let Some(&i) = block.iter().find(|&&i| i >= rows.len()) {
        return Err(dims(format!("block index {i} outside 0..{}", rows.len())));
    }
    let s = block.len();
    let mut m = DMatrix::zeros(s, s);
    for a in 0..s {
        for b in a..s {
            let (i, j) = (block[a], block[b]);
            let v = y[i] * y[j] * k.eval_sparse(&rows[i], &rows[j]);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    Ok(m)
}

/// Counters for the kernel row cache.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
    pub kernel_evals: usize,
}

/// Added to the diagonal of `Q` so that wide kernels on near-duplicate
/// points still give factorable blocks.
pub const KERNEL_RIDGE: f64 = 1e-10;

/// The SVM quadratic term `Q + KERNEL_RIDGE·I`. Full rows `Q[i, ·]` are computed when a block
/// needs them and kept in a least-recently-used cache; `Q` as a whole is
/// never stored.
pub struct KernelQ<'a> {
    rows: &'a [Vec<(usize, f64)>],
    y: &'a [f64],
    kernel: KernelSpec,
    cache: LruCache<usize, Vec<f64>>,
    stats: CacheStats,
}

impl<'a> KernelQ<'a> {
    pub fn new(rows: &'a [Vec<(usize, f64)>], y: &'a [f64], kernel: KernelSpec, capacity: usize) -> Result<Self> {
        kernel.validate()?;
        if rows.len() != y.len() {
            return Err(dims(format!("{} rows but {} labels", rows.len(), y.len())));
        }
        let cap = NonZeroUsize::new(capacity.max(1)).expect("positive");
        Ok(Self {
            rows,
            y,
            kernel,
            cache: LruCache::new(cap),
            stats: CacheStats::default(),
        })
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    pub fn cached_rows(&self) -> usize {
        self.cache.len()
    }

    fn entry(&mut self, i: usize, j: usize) -> f64 {
        self.stats.kernel_evals += 1;
        let q = self.y[i] * self.y[j] * self.kernel.eval_sparse(&self.rows[i], &self.rows[j]);
        if i == j {
            q + KERNEL_RIDGE
        } else {
            q
        }
    }

    /// `Q[i, ·]`
    pub fn row(&mut self, i: usize) -> &[f64] {
        if self.cache.contains(&i) {
            self.stats.hits += 1;
        } else {
            self.stats.misses += 1;
            let row: Vec<f64> = (0..self.rows.len()).map(|j| self.entry(i, j)).collect();
            self.cache.put(i, row);
        }
        self.cache.get(&i).expect("just inserted")
    }
}

impl QuadraticTerm for KernelQ<'_> {
    fn dim(&self) -> usize {
        self.rows.len()
    }

    fn block(&mut self, idx: &[usize]) -> DMatrix<f64> {
        let s = idx.len();
        let mut m = DMatrix::zeros(s, s);
        for a in 0..s {
            let row = self.row(idx[a]);
            for b in 0..s {
                m[(a, b)] = row[idx[b]];
            }
        }
        m
    }

    fn apply(&mut self, x: &[f64], out: &mut [f64]) {
        let n = self.rows.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        let support: Vec<usize> = (0..n).filter(|&j| x[j] != 0.0).collect();
        for i in 0..n {
            let mut acc = 0.0;
            for &j in &support {
                acc += self.entry(i, j) * x[j];
            }
            out[i] = acc;
        }
    }

    fn add_columns(&mut self, idx: &[usize], delta: &[f64], out: &mut [f64]) {
        for (&j, &d) in idx.iter().zip(delta) {
            if d != 0.0 {
                let row = self.row(j);
                for (o, q) in out.iter_mut().zip(row) {
                    *o += q * d;
                }
            }
        }
    }
}
