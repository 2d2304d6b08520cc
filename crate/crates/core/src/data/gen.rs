//! Seeded synthetic data.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{sparse_from_rows, Dataset};
use crate::error::{invalid, Result};
use crate::linalg::{DenseMatrix, Matrix};
use crate::partition::rng_from_seed;
use crate::problem::QpProblem;

/// What a generator was asked for, loggable next to its output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorManifest {
    pub kind: String,
    pub params: Value,
    pub seed: u64,
}

impl GeneratorManifest {
    pub fn regression(n: usize, p: usize, x_density: f64, coef_density: f64, noise_sd: f64, seed: u64) -> Self {
        Self {
            kind: "regression".into(),
            params: json!({
                "n": n, "p": p, "x_density": x_density,
                "coef_density": coef_density, "noise_sd": noise_sd,
            }),
            seed,
        }
    }

    pub fn blobs(n_per_class: usize, dim: usize, center_distance: f64, seed: u64) -> Self {
        Self {
            kind: "blobs".into(),
            params: json!({ "n_per_class": n_per_class, "dim": dim, "center_distance": center_distance }),
            seed,
        }
    }

    pub fn qp(n: usize, m: usize, zero_h: bool, seed: u64) -> Self {
        Self {
            kind: "qp".into(),
            params: json!({ "n": n, "m": m, "zero_h": zero_h }),
            seed,
        }
    }
}

fn gauss(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn check_density(name: &str, d: f64) -> Result<()> {
    if d > 0.0 && d <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in (0, 1], got {d}")))
    }
}

/// Sparse linear regression: `y = Xβ* + noise`.
///
/// Each entry of `X` is present with probability `x_density` and drawn
/// from `Uniform(0, 1)`; each entry of `β*` is nonzero with probability
/// `coef_density` and standard Gaussian. `X` is dense when `x_density = 1`.
pub fn gen_regression(
    n: usize,
    p: usize,
    x_density: f64,
    coef_density: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<(Dataset, Vec<f64>)> {
    if n == 0 || p == 0 {
        return Err(invalid("n and p must be at least 1"));
    }
    check_density("x_density", x_density)?;
    check_density("coef_density", coef_density)?;
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(invalid(format!("noise_sd must be finite and non-negative, got {noise_sd}")));
    }
    let mut rng = rng_from_seed(seed);

    let beta: Vec<f64> = (0..p)
        .map(|_| {
            if coef_density >= 1.0 || rng.gen_bool(coef_density) {
                gauss(&mut rng)
            } else {
                0.0
            }
        })
        .collect();

    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::new();
        for j in 0..p {
            if x_density >= 1.0 || rng.gen_bool(x_density) {
                row.push((j, rng.gen::<f64>()));
            }
        }
        rows.push(row);
    }

    let y: Vec<f64> = rows
        .iter()
        .map(|row| {
            let signal: f64 = row.iter().map(|&(j, v)| v * beta[j]).sum();
            if noise_sd > 0.0 {
                signal + noise_sd * gauss(&mut rng)
            } else {
                signal
            }
        })
        .collect();

    let x = if x_density >= 1.0 {
        let data = rows.iter().flat_map(|r| r.iter().map(|&(_, v)| v)).collect();
        Matrix::Dense(DenseMatrix::new(n, p, data)?)
    } else {
        Matrix::Sparse(sparse_from_rows(n, p, &rows)?)
    };
    Ok((Dataset::new(x, y)?, beta))
}

/// Two unit-variance Gaussian clusters at `±(center_distance/2)·e₁`.
///
/// The first `n_per_class` rows carry label `+1`, the rest `−1`.
pub fn gen_blobs(n_per_class: usize, dim: usize, center_distance: f64, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 || dim == 0 {
        return Err(invalid("n_per_class and dim must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let n = 2 * n_per_class;
    let mut data = Vec::with_capacity(n * dim);
    let mut y = Vec::with_capacity(n);
    for (label, sign) in [(1.0, 1.0), (-1.0, -1.0)] {
        for _ in 0..n_per_class {
            for j in 0..dim {
                let shift = if j == 0 { sign * center_distance / 2.0 } else { 0.0 };
                data.push(shift + gauss(&mut rng));
            }
            y.push(label);
        }
    }
    Dataset::new(DenseMatrix::new(n, dim, data)?.into(), y)
}

/// Random equality-constrained QP.
///
/// `H = BBᵀ/n + 0.1·I` with Gaussian `B`, or absent when `zero_h`; `A` is
/// `m × n` Gaussian (full row rank with probability one); `c`, `b` are
/// Gaussian; no bounds. With `zero_h` the block matrices are only positive
/// definite when `A` has full column rank, i.e. `m ≥ n`.
pub fn gen_qp(n: usize, m: usize, zero_h: bool, seed: u64) -> Result<QpProblem> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let h = if zero_h {
        None
    } else {
        let b: Vec<f64> = (0..n * n).map(|_| gauss(&mut rng)).collect();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let bij: f64 = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum();
                data[i * n + j] = bij / n as f64 + if i == j { 0.1 } else { 0.0 };
            }
        }
        Some(Matrix::Dense(DenseMatrix::new(n, n, data)?))
    };
    let c: Vec<f64> = (0..n).map(|_| gauss(&mut rng)).collect();
    let mut problem = QpProblem::new(h, c);
    if m > 0 {
        let a: Vec<f64> = (0..m * n).map(|_| gauss(&mut rng)).collect();
        let b: Vec<f64> = (0..m).map(|_| gauss(&mut rng)).collect();
        problem = problem.with_constraints(Matrix::Dense(DenseMatrix::new(m, n, a)?), b);
    }
    Ok(problem)
}
