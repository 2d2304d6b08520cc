//! Two-block sharing ADMM baseline for the same objective.
//!
//! With `A = X/√n` split into column blocks `A_i`, each block gets a copy
//! `w_i = A_iβ_i` of its share of the fit:
//!
//! ```text
//!     minimize  ½‖Σ w_i − y/√n‖² + P(z)   s.t.  A_iβ_i − w_i = 0,  β − z = 0
//! ```
//!
//! The first ADMM block is every `β_i` (independent given `w`, `z`); the
//! second is `(w, z)`. Both constraints use the penalty `γ`. Convergence is
//! declared when the total feasibility residual
//! `max(‖β − z‖₁, Σ‖A_iβ_i − w_i‖₁)` reaches the tolerance.

use nalgebra::{Cholesky, DVector, Dyn};

use super::{block_gram, check_inputs, factor_block, z_update, ElasticNetModel, ElasticNetSpec};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::partition::partition_with;

pub fn consensus_fit(x: &Matrix, y: &[f64], spec: &ElasticNetSpec) -> Result<ElasticNetModel> {
    check_inputs(x, y, spec)?;
    let (n, p) = (x.rows(), x.cols());
    let root_n = (n as f64).sqrt();
    let (lambda, alpha) = (spec.lambda, spec.alpha);
    let gamma = spec.gamma.resolve(lambda, x.density());
    let rho = gamma;
    let blocks = partition_with(p, spec.block_size.min(p), None)?.groups().to_vec();
    let nb = blocks.len();

    let factors: Vec<Cholesky<f64, Dyn>> = blocks
        .iter()
        .map(|b| {
            let (g, _) = block_gram(x, b);
            let mut m = g * rho;
            for a in 0..b.len() {
                m[(a, a)] += gamma;
            }
            factor_block(m)
        })
        .collect::<Result<_>>()?;

    let y_scaled: Vec<f64> = y.iter().map(|v| v / root_n).collect();
    let mut beta = vec![0.0; p];
    let mut z = vec![0.0; p];
    let mut xi = vec![0.0; p];
    let mut w = vec![vec![0.0; n]; nb];
    let mut u = vec![vec![0.0; n]; nb];
    let mut fit = vec![vec![0.0; n]; nb];

    let mut history = Vec::new();
    let mut iterations = 0;
    for k in 1..=spec.iters {
        for (i, block) in blocks.iter().enumerate() {
            let target: Vec<f64> = (0..n).map(|t| rho * w[i][t] + u[i][t]).collect();
            let mut rhs = DVector::from_fn(block.len(), |a, _| {
                let j = block[a];
                x.col_dot(j, &target) / root_n + xi[j] + gamma * z[j]
            });
            factors[i].solve_mut(&mut rhs);
            fit[i].iter_mut().for_each(|v| *v = 0.0);
            for (a, &j) in block.iter().enumerate() {
                beta[j] = rhs[a];
                x.col_axpy(j, rhs[a] / root_n, &mut fit[i]);
            }
        }

        // w_i = v_i + t with v_i = A_iβ_i − u_i/ρ and a common shift t.
        let mut shift: Vec<f64> = y_scaled.clone();
        for i in 0..nb {
            for t in 0..n {
                w[i][t] = fit[i][t] - u[i][t] / rho;
                shift[t] -= w[i][t];
            }
        }
        for v in shift.iter_mut() {
            *v /= nb as f64 + rho;
        }
        for wi in w.iter_mut() {
            for (v, s) in wi.iter_mut().zip(&shift) {
                *v += s;
            }
        }
        for j in 0..p {
            z[j] = z_update(beta[j], xi[j], gamma, lambda, alpha);
        }

        let mut share_residual = 0.0;
        for i in 0..nb {
            for t in 0..n {
                let d = fit[i][t] - w[i][t];
                u[i][t] -= rho * d;
                share_residual += d.abs();
            }
        }
        for j in 0..p {
            xi[j] -= gamma * (beta[j] - z[j]);
        }
        let res: f64 = beta.iter().zip(&z).map(|(b, z)| (b - z).abs()).sum();
        history.push(res);
        iterations = k;
        if let Some(tol) = spec.tol {
            if res.max(share_residual) <= tol {
                break;
            }
        }
    }

    let residual = *history.last().expect("at least one sweep");
    Ok(ElasticNetModel {
        beta,
        z,
        xi,
        spec: spec.clone(),
        gamma,
        iterations,
        residual,
        residual_history: history,
    })
}
