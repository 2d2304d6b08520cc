//! Elastic-net regression
//!
//! ```text
//!     minimize  1/(2n)·‖y − Xβ‖² + λ((1−α)/2·‖z‖² + α‖z‖₁)   s.t.  β − z = 0
//! ```
//!
//! `β` is swept in blocks (RAC or RP); each block system
//! `(X_bᵀX_b/n + γI)·β_b = …` is assembled from the columns of `X` when the
//! block is drawn, so the `p × p` Gram matrix never exists. `z` is one
//! block with a closed-form update, followed by `ξ ← ξ − γ(β − z)`.

mod consensus;
mod model;


use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{dims, invalid, Error, Result};
use crate::linalg::{norm_1, Matrix};
use crate::partition::{partition_with, rng_from_seed};

pub use consensus::consensus_fit;
pub use model::{load_model, save_model};

/// Design density at or above which Auto `γ` is `0.1λ` and RP caches
/// block factorizations.
pub const DENSE_DESIGN: f64 = 0.005;

/// Negated soft-threshold, the opposite sign of the textbook shrinkage:
/// `S(a, b) = −sign(a)·max(|a| − b, 0)`.
pub fn soft_threshold(a: f64, b: f64) -> Result<f64> {
    if !(b >= 0.0) {
        return Err(invalid(format!("threshold must be non-negative, got {b}")));
    }
    Ok(shrink(a, b))
}

fn shrink(a: f64, b: f64) -> f64 {
    if b < a.abs() {
        if a > 0.0 {
            -(a - b)
        } else {
            -(a + b)
        }
    } else {
        0.0
    }
}

/// Minimizer over `z` of `(ξ − γβ)z + (γ/2)z² + λα|z| + λ(1−α)/2·z²`.
pub fn z_update(beta: f64, xi: f64, gamma: f64, lambda: f64, alpha: f64) -> f64 {
    shrink(xi - gamma * beta, lambda * alpha) / ((1.0 - alpha) * lambda + gamma)
}

/// Penalty parameter of the `β − z = 0` constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    /// `0.1λ` for designs with density ≥ 0.005, `λ` below; `1` when `λ = 0`.
    Auto,
    Fixed(f64),
}

impl Gamma {
    pub fn resolve(self, lambda: f64, density: f64) -> f64 {
        match self {
            Gamma::Fixed(g) => g,
            Gamma::Auto if lambda == 0.0 => 1.0,
            Gamma::Auto if density >= DENSE_DESIGN => 0.1 * lambda,
            Gamma::Auto => lambda,
        }
    }
}

impl std::str::FromStr for Gamma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Gamma::Auto);
        }
        s.parse::<f64>()
            .map(Gamma::Fixed)
            .map_err(|_| invalid(format!("gamma must be 'auto' or a number, got '{s}'")))
    }
}

impl Serialize for Gamma {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Gamma::Auto => ser.serialize_str("auto"),
            Gamma::Fixed(g) => ser.serialize_f64(*g),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(de)? {
            Repr::Number(g) => Ok(Gamma::Fixed(g)),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockMode {
    Rac,
    Rp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetSpec {
    pub lambda: f64,
    pub alpha: f64,
    pub gamma: Gamma,
    pub block_size: usize,
    /// Maximum number of sweeps.
    pub iters: usize,
    pub mode: BlockMode,
    pub seed: u64,
    /// Stop once `‖β − z‖₁` falls to this value.
    #[serde(default)]
    pub tol: Option<f64>,
}

impl Default for ElasticNetSpec {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            alpha: 1.0,
            gamma: Gamma::Auto,
            block_size: 100,
            iters: 10,
            mode: BlockMode::Rac,
            seed: 0,
            tol: None,
        }
    }
}

impl ElasticNetSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if let Gamma::Fixed(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(invalid(format!("gamma must be positive, got {g}")));
            }
        }
        if self.block_size == 0 {
            return Err(invalid("block size must be at least 1"));
        }
        if self.iters == 0 {
            return Err(invalid("iters must be at least 1"));
        }
        if let Some(t) = self.tol {
            if !(t >= 0.0) {
                return Err(invalid(format!("tolerance must be >= 0, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetModel {
    pub beta: Vec<f64>,
    pub z: Vec<f64>,
    pub xi: Vec<f64>,
    pub spec: ElasticNetSpec,
    /// `γ` after resolving `Auto`.
    pub gamma: f64,
    pub iterations: usize,
    /// Final `‖β − z‖₁`.
    pub residual: f64,
    /// `‖β − z‖₁` after every sweep.
    pub residual_history: Vec<f64>,
}

impl ElasticNetModel {
    pub fn feature_count(&self) -> usize {
        self.beta.len()
    }
}

/// Scratch accounting for one fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FitStats {
    /// Largest number of `f64`s allocated for a single block update.
    pub peak_block_scratch: usize,
    /// `f64`s held by cached RP factorizations.
    pub cached_factor_scalars: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `‖Xβ − y‖₂`.
    pub l2_loss: f64,
    /// `‖Xβ − y‖₂² / n`.
    pub model_error: f64,
}

/// `1/(2n)‖y − Xβ‖² + λ((1−α)/2‖β‖² + α‖β‖₁)`.
pub fn objective(x: &Matrix, y: &[f64], beta: &[f64], lambda: f64, alpha: f64) -> f64 {
    let n = y.len();
    let mut r = vec![0.0; n];
    x.mul_vec(beta, &mut r);
    let loss: f64 = r.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * n as f64);
    let sq: f64 = beta.iter().map(|b| b * b).sum();
    loss + lambda * ((1.0 - alpha) / 2.0 * sq + alpha * norm_1(beta))
}

pub fn evaluate(model: &ElasticNetModel, x: &Matrix, y: &[f64]) -> Result<Metrics> {
    if x.cols() != model.feature_count() {
        return Err(dims(format!(
            "model has {} features, data has {}",
            model.feature_count(),
            x.cols()
        )));
    }
    if x.rows() != y.len() {
        return Err(dims(format!("{} rows but {} targets", x.rows(), y.len())));
    }
    let mut r = vec![0.0; y.len()];
    x.mul_vec(&model.beta, &mut r);
    let sq: f64 = r.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(Metrics {
        l2_loss: sq.sqrt(),
        model_error: if y.is_empty() { 0.0 } else { sq / y.len() as f64 },
    })
}

pub(super) fn check_inputs(x: &Matrix, y: &[f64], spec: &ElasticNetSpec) -> Result<()> {
    spec.validate()?;
    if x.rows() == 0 || x.cols() == 0 {
        return Err(invalid("design matrix must have at least one row and one column"));
    }
    if x.rows() != y.len() {
        return Err(dims(format!("{} rows but {} targets", x.rows(), y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("targets must be finite"));
    }
    Ok(())
}

pub(super) fn factor_block(g: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let s = g.nrows();
    Cholesky::new(g).ok_or_else(|| {
        Error::AssumptionViolation(format!(
            "{s}x{s} sub-block X_b^T X_b / n + gamma I is not positive definite"
        ))
    })
}

/// `X_bᵀX_b / n` for the columns in `block`.
///
/// Dense designs gather the `n × s` column slab and multiply; sparse ones
/// merge column pairs. Returns the matrix and the scratch it took.
pub(super) fn block_gram(x: &Matrix, block: &[usize]) -> (DMatrix<f64>, usize) {
    let n = x.rows();
    let s = block.len();
    let scale = 1.0 / n as f64;
    match x {
        Matrix::Dense(d) => {
            let slab = DMatrix::from_fn(n, s, |i, a| d.get(i, block[a]));
            ((slab.transpose() * &slab) * scale, n * s + s * s)
        }
        Matrix::Sparse(_) => {
            let mut g = DMatrix::zeros(s, s);
            for a in 0..s {
                for b in a..s {
                    let v = x.col_col_dot(block[a], block[b]) * scale;
                    g[(a, b)] = v;
                    g[(b, a)] = v;
                }
            }
            (g, s * s)
        }
    }
}

/// Fits the elastic net with RAC or RP block sweeps.
pub fn fit(x: &Matrix, y: &[f64], spec: &ElasticNetSpec) -> Result<ElasticNetModel> {
    fit_with_stats(x, y, spec).map(|(m, _)| m)
}

pub fn fit_with_stats(x: &Matrix, y: &[f64], spec: &ElasticNetSpec) -> Result<(ElasticNetModel, FitStats)> {
    check_inputs(x, y, spec)?;
    let (n, p) = (x.rows(), x.cols());
    let nf = n as f64;
    let (lambda, alpha) = (spec.lambda, spec.alpha);
    let density = x.density();
    let gamma = spec.gamma.resolve(lambda, density);
    let s = spec.block_size.min(p);

    let mut xty = vec![0.0; p];
    x.tr_mul_vec(y, &mut xty);
    xty.iter_mut().for_each(|v| *v /= nf);

    let mut beta = vec![0.0; p];
    let mut z = vec![0.0; p];
    let mut xi = vec![0.0; p];
    let mut r = vec![0.0; n];
    let mut stats = FitStats::default();

    let mut rng = rng_from_seed(spec.seed);
    let fixed = partition_with(p, s, None)?;
    let prefactor = spec.mode == BlockMode::Rp && density >= DENSE_DESIGN;
    let mut factors: HashMap<usize, (DMatrix<f64>, Cholesky<f64, Dyn>)> = HashMap::new();

    let mut history = Vec::new();
    let mut iterations = 0;
    for k in 1..=spec.iters {
        let order = match spec.mode {
            BlockMode::Rac => partition_with(p, s, Some(&mut rng))?.in_order(),
            BlockMode::Rp => fixed.permuted(&mut rng),
        };
        // Recompute Xβ once per sweep so incremental updates cannot drift.
        x.mul_vec(&beta, &mut r);

        for block in order.groups() {
            let sb = block.len();
            let build = |stats: &mut FitStats| -> Result<(DMatrix<f64>, Cholesky<f64, Dyn>)> {
                let (g, scratch) = block_gram(x, block);
                let mut m = g.clone();
                for a in 0..sb {
                    m[(a, a)] += gamma;
                }
                stats.peak_block_scratch = stats.peak_block_scratch.max(scratch + sb * sb + 3 * sb);
                Ok((g, factor_block(m)?))
            };
            let local;
            let (g, chol) = if prefactor {
                if !factors.contains_key(&block[0]) {
                    let built = build(&mut stats)?;
                    stats.cached_factor_scalars += 2 * sb * sb;
                    factors.insert(block[0], built);
                }
                let (g, c) = &factors[&block[0]];
                (g, c)
            } else {
                local = build(&mut stats)?;
                (&local.0, &local.1)
            };

            // rhs = Xᵀy/n − X_bᵀ(Xβ − X_bβ_b)/n + ξ_b + γ z_b
            let old: Vec<f64> = block.iter().map(|&j| beta[j]).collect();
            let g_old = g * DVector::from_column_slice(&old);
            let mut rhs = DVector::from_fn(sb, |a, _| {
                let j = block[a];
                xty[j] - x.col_dot(j, &r) / nf + g_old[a] + xi[j] + gamma * z[j]
            });
            chol.solve_mut(&mut rhs);
            for (a, &j) in block.iter().enumerate() {
                let delta = rhs[a] - old[a];
                if delta != 0.0 {
                    x.col_axpy(j, delta, &mut r);
                }
                beta[j] = rhs[a];
            }
        }

        for j in 0..p {
            z[j] = z_update(beta[j], xi[j], gamma, lambda, alpha);
        }
        for j in 0..p {
            xi[j] -= gamma * (beta[j] - z[j]);
        }
        let res: f64 = beta.iter().zip(&z).map(|(b, z)| (b - z).abs()).sum();
        history.push(res);
        iterations = k;
        if let Some(tol) = spec.tol {
            if res <= tol {
                break;
            }
        }
    }

    let residual = *history.last().expect("at least one sweep");
    let model = ElasticNetModel {
        beta,
        z,
        xi,
        spec: spec.clone(),
        gamma,
        iterations,
        residual,
        residual_history: history,
    };
    Ok((model, stats))
}
