use serde::{Deserialize, Serialize};

use super::LinearData;
use crate::linalg::{norm_1, norm_inf};
use crate::problem::QpProblem;

/// Feasibility and stationarity measures of an iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPair {
    /// `‖Ax − b‖_∞`
    pub primal: f64,
    /// `‖Ax − b‖₁`
    pub primal_l1: f64,
    /// `‖Π(x − ∇ₓL(x, y)) − x‖_∞` with `∇ₓL = Hx + c − Aᵀy` and `Π` the box
    /// projection.
    pub dual: f64,
    /// `β‖A(x − x_prev)‖_∞`, the classical ADMM step residual.
    pub step: f64,
}

/// Residuals of `(x, y)` for `problem`; `x_prev` only feeds `step`.
pub fn compute_residuals(
    problem: &QpProblem,
    x: &[f64],
    x_prev: &[f64],
    y: &[f64],
    beta: f64,
) -> ResidualPair {
    let n = problem.n();
    let mut hx = vec![0.0; n];
    if let Some(h) = &problem.h {
        h.mul_vec(x, &mut hx);
    }
    let mut r: Vec<f64> = problem.b.iter().map(|b| -b).collect();
    if let Some(a) = &problem.a {
        for (j, &xj) in x.iter().enumerate() {
            a.col_axpy(j, xj, &mut r);
        }
    }
    residuals_from_parts(x, x_prev, y, &hx, &r, LinearData::of(problem), beta)
}

pub(crate) fn residuals_from_parts(
    x: &[f64],
    x_prev: &[f64],
    y: &[f64],
    hx: &[f64],
    r: &[f64],
    data: LinearData<'_>,
    beta: f64,
) -> ResidualPair {
    let mut dual: f64 = 0.0;
    for j in 0..x.len() {
        let mut g = hx[j] + data.c[j];
        if let Some(a) = data.a {
            g -= a.col_dot(j, y);
        }
        let projected = (x[j] - g).max(data.lower[j]).min(data.upper[j]);
        dual = dual.max((projected - x[j]).abs());
    }
    let step = match data.a {
        Some(a) => {
            let mut d = vec![0.0; data.b.len()];
            for (j, (xj, pj)) in x.iter().zip(x_prev).enumerate() {
                a.col_axpy(j, xj - pj, &mut d);
            }
            beta * norm_inf(&d)
        }
        None => 0.0,
    };
    ResidualPair {
        primal: norm_inf(r),
        primal_l1: norm_1(r),
        dual,
        step,
    }
}
