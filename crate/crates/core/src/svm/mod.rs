//! C-SVC through its dual
//!
//! ```text
//!     minimize  ½ zᵀQz − eᵀz   s.t.  yᵀz = 0,  0 ≤ z ≤ C,   q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! solved by the block engine with `Q` assembled one block at a time.

mod grid;
mod io;
mod kernel;

#[cfg(test)]
mod tests;

use serde::{Deserialize, Serialize};

use crate::config::{Mode, SolveResult, SolverConfig};
use crate::data::Dataset;
use crate::engine::{run, Engine, LinearData};
use crate::error::{dims, invalid, Error, Result};
use crate::linalg::{DenseMatrix, Matrix};

pub use grid::{grid_search, GridCell, GridResult};
pub use io::{load_model, save_model};
pub use kernel::{assemble_kernel_block, kernel_eval, CacheStats, KernelQ, KernelSpec, KERNEL_RIDGE};

/// Duals above this are support vectors.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;
/// Margin test width relative to `C`: `δ = MARGIN_DELTA · C`.
pub const MARGIN_DELTA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_points: Vec<Vec<f64>>,
    pub support_duals: Vec<f64>,
    pub support_labels: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    #[serde(rename = "C")]
    pub c: f64,
    pub feature_count: usize,
}

/// Block size by training-set size: 100 below 30k points, 500 below 100k,
/// 1000 above, never more than `n`.
pub fn default_block_size(n: usize) -> usize {
    let s = if n < 30_000 {
        100
    } else if n < 100_000 {
        500
    } else {
        1000
    };
    s.min(n).max(1)
}

/// `β = 0.1·⌈n/s⌉`.
pub fn default_penalty(n: usize, block_size: usize) -> f64 {
    0.1 * n.div_ceil(block_size.max(1)) as f64
}

/// RAC with `ε_p = 0.1`, `ε_d = 1`, 10 sweeps, default block size and penalty.
pub fn default_config(n: usize) -> SolverConfig {
    let s = default_block_size(n);
    SolverConfig {
        mode: Mode::Rac,
        block_size: s,
        beta_penalty: default_penalty(n, s),
        max_iters: 10,
        tol_primal: 1e-1,
        tol_dual: 1.0,
        seed: 0,
        fixed_iterations: false,
    }
}

/// Trains with every sweep reported to `observer` as `(sweep, z)`.
pub fn train_observed(
    data: &Dataset,
    c: f64,
    kernel: KernelSpec,
    config: &SolverConfig,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<(SvmModel, SolveResult)> {
    data.check_binary()?;
    kernel.validate()?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("C must be positive, got {c}")));
    }
    let n = data.n();
    if n == 0 {
        return Err(invalid("no training points"));
    }
    let rows = data.sparse_rows();
    let y = &data.y;
    let quad = KernelQ::new(&rows, y, kernel, 2 * config.block_size)?;
    let cost = vec![-1.0; n];
    let a: Matrix = DenseMatrix::new(1, n, y.clone())?.into();
    let zero = [0.0];
    let lower = vec![0.0; n];
    let upper = vec![c; n];
    let linear = LinearData {
        c: &cost,
        a: Some(&a),
        b: &zero,
        lower: &lower,
        upper: &upper,
    };
    let engine = Engine::new(quad, linear, config.beta_penalty)?;
    let result = run(engine, config, |ev| observer(ev.iteration, ev.x))?;
    let model = model_from_duals(&result.x, data, &rows, c, kernel)?;
    Ok((model, result))
}

pub fn train(data: &Dataset, c: f64, kernel: KernelSpec, config: &SolverConfig) -> Result<(SvmModel, SolveResult)> {
    train_observed(data, c, kernel, config, |_, _| {})
}

fn model_from_duals(
    z: &[f64],
    data: &Dataset,
    rows: &[Vec<(usize, f64)>],
    c: f64,
    kernel: KernelSpec,
) -> Result<SvmModel> {
    let bias = bias_from_rows(z, rows, &data.y, c, &kernel)?;
    let sv: Vec<usize> = (0..z.len()).filter(|&i| z[i] > SUPPORT_THRESHOLD).collect();
    Ok(SvmModel {
        support_points: sv.iter().map(|&i| data.row(i)).collect(),
        support_duals: sv.iter().map(|&i| z[i].min(c)).collect(),
        support_labels: sv.iter().map(|&i| data.y[i]).collect(),
        bias,
        kernel,
        c,
        feature_count: data.feature_count(),
    })
}

/// Bias from the duals: the mean of `y_i − Σ_j y_j z_j K(x_j, x_i)` over
/// margin support vectors (`δ < z_i < C − δ`). Without margin vectors the
/// midpoint of the KKT interval for `b` is used.
pub fn compute_bias(z: &[f64], data: &Dataset, c: f64, kernel: &KernelSpec) -> Result<f64> {
    if z.len() != data.n() {
        return Err(dims(format!("{} duals for {} points", z.len(), data.n())));
    }
    data.check_binary()?;
    bias_from_rows(z, &data.sparse_rows(), &data.y, c, kernel)
}

fn bias_from_rows(z: &[f64], rows: &[Vec<(usize, f64)>], y: &[f64], c: f64, kernel: &KernelSpec) -> Result<f64> {
    let sv: Vec<usize> = (0..z.len()).filter(|&i| z[i] > SUPPORT_THRESHOLD).collect();
    if sv.is_empty() {
        return Err(Error::ModelDegenerate("no support vectors".into()));
    }
    let f = |i: usize| -> f64 {
        sv.iter()
            .map(|&j| y[j] * z[j] * kernel.eval_sparse(&rows[j], &rows[i]))
            .sum()
    };
    let delta = MARGIN_DELTA * c;
    let margin: Vec<usize> = (0..z.len()).filter(|&i| z[i] > delta && z[i] < c - delta).collect();
    if !margin.is_empty() {
        return Ok(margin.iter().map(|&i| y[i] - f(i)).sum::<f64>() / margin.len() as f64);
    }

    // y_i(f_i + b) ≥ 1 at z_i = 0 and ≤ 1 at z_i = C bound b on each side.
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..z.len() {
        let e = y[i] - f(i);
        let at_upper = z[i] >= c - delta;
        if (y[i] > 0.0) != at_upper {
            lo = lo.max(e);
        } else {
            hi = hi.min(e);
        }
    }
    Ok(match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => unreachable!("every point bounds b on one side"),
    })
}

/// `Σ_i y_i z_i K(x_i, x) + b`
pub fn decision_value(model: &SvmModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.feature_count {
        return Err(dims(format!(
            "model has {} features, query has {}",
            model.feature_count,
            x.len()
        )));
    }
    let mut f = model.bias;
    for ((p, z), y) in model.support_points.iter().zip(&model.support_duals).zip(&model.support_labels) {
        f += y * z * kernel_eval(p, x, &model.kernel)?;
    }
    Ok(f)
}

/// Labels `±1` for every row of `x`; a zero decision value maps to `+1`.
pub fn predict(model: &SvmModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != model.feature_count {
        return Err(dims(format!(
            "model has {} features, data has {}",
            model.feature_count,
            x.cols()
        )));
    }
    (0..x.rows())
        .map(|i| {
            let row = crate::data::dense_row(x, i);
            decision_value(model, &row).map(|f| if f >= 0.0 { 1.0 } else { -1.0 })
        })
        .collect()
}

/// Percentage of rows whose predicted label equals the target.
pub fn accuracy(model: &SvmModel, x: &Matrix, y: &[f64]) -> Result<f64> {
    if x.rows() != y.len() {
        return Err(dims(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if y.is_empty() {
        return Err(invalid("accuracy of an empty test set"));
    }
    let pred = predict(model, x)?;
    let correct = pred.iter().zip(y).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / y.len() as f64 * 100.0)
}

/// `½ zᵀQz − eᵀz`, evaluated directly.
pub fn dual_objective(z: &[f64], data: &Dataset, kernel: &KernelSpec) -> Result<f64> {
    if z.len() != data.n() {
        return Err(dims(format!("{} duals for {} points", z.len(), data.n())));
    }
    let rows = data.sparse_rows();
    let y = &data.y;
    let mut quad = 0.0;
    for i in 0..z.len() {
        if z[i] == 0.0 {
            continue;
        }
        for j in 0..z.len() {
            if z[j] != 0.0 {
                quad += z[i] * z[j] * y[i] * y[j] * kernel.eval_sparse(&rows[i], &rows[j]);
            }
        }
    }
    Ok(0.5 * quad - z.iter().sum::<f64>())
}
