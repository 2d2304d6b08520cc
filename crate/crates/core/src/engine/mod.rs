//! Randomly assembled cyclic multi-block ADMM.
//!
//! Each sweep groups the variables into blocks (how depends on [`Mode`]),
//! minimizes the augmented Lagrangian
//!
//! ```text
//!     L_A(x, y) = ½ xᵀHx + cᵀx − yᵀ(Ax − b) + (β/2)‖Ax − b‖²
//! ```
//!
//! exactly over each block in turn with every other block held at its
//! latest value, then takes one dual step `y ← y − β(Ax − b)`.

mod block;
mod residual;

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::config::{Mode, SolveResult, SolverConfig, Status};
use crate::error::{dims, invalid, Result};
use crate::linalg::{dot, Matrix};
use crate::partition::{partition_with, rng_from_seed, UpdateOrder};
use crate::problem::QpProblem;

pub use block::{solve_block, BlockSystem};
pub use residual::{compute_residuals, ResidualPair};

/// Primal residual growth (relative to the starting residual) that is
/// reported as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e8;

/// Access to the quadratic term `H` without requiring it to be stored.
pub trait QuadraticTerm {
    fn dim(&self) -> usize;
    /// `H[idx, idx]`
    fn block(&mut self, idx: &[usize]) -> DMatrix<f64>;
    /// `out = H x`
    fn apply(&mut self, x: &[f64], out: &mut [f64]);
    /// `out += H[:, idx] · delta`
    fn add_columns(&mut self, idx: &[usize], delta: &[f64], out: &mut [f64]);
}

/// `H` stored as a matrix, or absent (zero).
#[derive(Debug, Clone, Copy)]
pub struct MatrixTerm<'a> {
    h: Option<&'a Matrix>,
    n: usize,
}

impl<'a> MatrixTerm<'a> {
    pub fn new(h: Option<&'a Matrix>, n: usize) -> Self {
        Self { h, n }
    }
}

impl QuadraticTerm for MatrixTerm<'_> {
    fn dim(&self) -> usize {
        self.n
    }

    fn block(&mut self, idx: &[usize]) -> DMatrix<f64> {
        match self.h {
            Some(h) => h.gather(idx, idx),
            None => DMatrix::zeros(idx.len(), idx.len()),
        }
    }

    fn apply(&mut self, x: &[f64], out: &mut [f64]) {
        match self.h {
            Some(h) => h.mul_vec(x, out),
            None => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    fn add_columns(&mut self, idx: &[usize], delta: &[f64], out: &mut [f64]) {
        if let Some(h) = self.h {
            for (&j, &d) in idx.iter().zip(delta) {
                h.col_axpy(j, d, out);
            }
        }
    }
}

/// The linear part of a problem: cost, equality constraints and box.
#[derive(Debug, Clone, Copy)]
pub struct LinearData<'a> {
    pub c: &'a [f64],
    pub a: Option<&'a Matrix>,
    pub b: &'a [f64],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

impl<'a> LinearData<'a> {
    pub fn of(problem: &'a QpProblem) -> Self {
        Self {
            c: &problem.c,
            a: problem.a.as_ref(),
            b: &problem.b,
            lower: &problem.lower,
            upper: &problem.upper,
        }
    }

    fn n(&self) -> usize {
        self.c.len()
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    fn bounded(&self, idx: &[usize]) -> bool {
        idx.iter()
            .any(|&i| self.lower[i].is_finite() || self.upper[i].is_finite())
    }
}

struct CachedBlock {
    system_matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

/// Iterate state of one solve. Exposes single block updates and dual steps
/// so that callers can drive or inspect individual sweeps.
pub struct Engine<'a, Q: QuadraticTerm> {
    quad: Q,
    data: LinearData<'a>,
    beta: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    /// `H x`, updated incrementally after each block.
    hx: Vec<f64>,
    /// `A x − b`, updated incrementally after each block.
    r: Vec<f64>,
    cache: Option<HashMap<usize, CachedBlock>>,
}

impl<'a> Engine<'a, MatrixTerm<'a>> {
    pub fn for_problem(problem: &'a QpProblem, beta: f64) -> Result<Self> {
        let report = problem.validate();
        if !report.is_valid() {
            return Err(invalid(format!("invalid problem: {report}")));
        }
        Engine::new(MatrixTerm::new(problem.h.as_ref(), problem.n()), LinearData::of(problem), beta)
    }
}

impl<'a, Q: QuadraticTerm> Engine<'a, Q> {
    /// Starts at `x = Π(0)`, `y = 0`.
    pub fn new(quad: Q, data: LinearData<'a>, beta: f64) -> Result<Self> {
        let n = data.n();
        if quad.dim() != n || data.lower.len() != n || data.upper.len() != n {
            return Err(dims("quadratic term, cost and bounds must share one dimension"));
        }
        if let Some(a) = data.a {
            if a.rows() != data.m() || a.cols() != n {
                return Err(dims(format!(
                    "A is {}x{}, expected {}x{n}",
                    a.rows(),
                    a.cols(),
                    data.m()
                )));
            }
        } else if data.m() > 0 {
            return Err(dims("b given without A"));
        }
        if !(beta > 0.0) {
            return Err(invalid(format!("penalty must be positive, got {beta}")));
        }
        let x: Vec<f64> = (0..n).map(|i| 0.0_f64.max(data.lower[i]).min(data.upper[i])).collect();
        let y = vec![0.0; data.m()];
        let mut engine = Self {
            quad,
            data,
            beta,
            hx: vec![0.0; n],
            r: vec![0.0; data.m()],
            x,
            y,
            cache: None,
        };
        engine.refresh();
        Ok(engine)
    }

    /// Replaces the iterate. `x` is used as given (not projected).
    pub fn set_state(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.x.len() || y.len() != self.y.len() {
            return Err(dims("state has wrong dimensions"));
        }
        self.x.copy_from_slice(x);
        self.y.copy_from_slice(y);
        self.refresh();
        Ok(())
    }

    /// Recomputes `Hx` and `Ax − b` from scratch.
    pub fn refresh(&mut self) {
        self.quad.apply(&self.x, &mut self.hx);
        self.r.copy_from_slice(self.data.b);
        self.r.iter_mut().for_each(|v| *v = -*v);
        if let Some(a) = self.data.a {
            for (j, &xj) in self.x.iter().enumerate() {
                a.col_axpy(j, xj, &mut self.r);
            }
        }
    }

    /// Caches each block's matrix and factorization on first use. Only
    /// valid while the partition stays fixed.
    pub fn enable_factor_cache(&mut self) {
        self.cache.get_or_insert_with(HashMap::new);
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn quad_mut(&mut self) -> &mut Q {
        &mut self.quad
    }

    /// `A x − b` at the current iterate.
    pub fn constraint_residual(&self) -> &[f64] {
        &self.r
    }

    /// `H x` at the current iterate.
    pub fn hx(&self) -> &[f64] {
        &self.hx
    }

    /// Value of the augmented Lagrangian at the current iterate.
    pub fn augmented_lagrangian(&self) -> f64 {
        0.5 * dot(&self.x, &self.hx) + dot(self.data.c, &self.x) - dot(&self.y, &self.r)
            + 0.5 * self.beta * dot(&self.r, &self.r)
    }

    fn block_matrix(&mut self, idx: &[usize]) -> DMatrix<f64> {
        let mut m = self.quad.block(idx);
        if let Some(a) = self.data.a {
            for p in 0..idx.len() {
                for q in 0..=p {
                    let v = self.beta * a.col_col_dot(idx[p], idx[q]);
                    m[(p, q)] += v;
                    if p != q {
                        m[(q, p)] += v;
                    }
                }
            }
        }
        m
    }

    /// Right-hand side `M x_b − ∇_b L_A(x, y)`.
    fn block_rhs(&self, idx: &[usize], matrix: &DMatrix<f64>) -> Vec<f64> {
        let grad: Vec<f64> = idx
            .iter()
            .map(|&j| {
                let mut g = self.data.c[j] + self.hx[j];
                if let Some(a) = self.data.a {
                    g += a.col_dot(j, &self.r) * self.beta - a.col_dot(j, &self.y);
                }
                g
            })
            .collect();
        (0..idx.len())
            .map(|p| (0..idx.len()).map(|q| matrix[(p, q)] * self.x[idx[q]]).sum::<f64>() - grad[p])
            .collect()
    }

    /// The block subproblem over `idx` at the current iterate.
    pub fn block_system(&mut self, idx: &[usize]) -> BlockSystem {
        let matrix = self.block_matrix(idx);
        let rhs = self.block_rhs(idx, &matrix);
        BlockSystem {
            matrix,
            rhs,
            lower: idx.iter().map(|&i| self.data.lower[i]).collect(),
            upper: idx.iter().map(|&i| self.data.upper[i]).collect(),
        }
    }

    /// Minimizes `L_A` exactly over the variables in `idx`.
    pub fn minimize_block(&mut self, idx: &[usize]) -> Result<()> {
        let start: Vec<f64> = idx.iter().map(|&i| self.x[i]).collect();
        let new = if let Some(key) = self.cache.as_ref().map(|_| idx[0]) {
            if !self.cache.as_ref().unwrap().contains_key(&key) {
                let system_matrix = self.block_matrix(idx);
                let chol = block::factor(system_matrix.clone())?;
                self.cache
                    .as_mut()
                    .unwrap()
                    .insert(key, CachedBlock { system_matrix, chol });
            }
            let cached = &self.cache.as_ref().unwrap()[&key];
            let sys = BlockSystem {
                matrix: cached.system_matrix.clone(),
                rhs: self.block_rhs(idx, &cached.system_matrix),
                lower: idx.iter().map(|&i| self.data.lower[i]).collect(),
                upper: idx.iter().map(|&i| self.data.upper[i]).collect(),
            };
            block::solve_block_from(&sys, Some(&start), Some(&cached.chol))?
        } else {
            let sys = self.block_system(idx);
            if self.data.bounded(idx) {
                block::solve_block_from(&sys, Some(&start), None)?
            } else {
                block::solve_block(&sys)?
            }
        };
        let delta: Vec<f64> = new.iter().zip(&start).map(|(a, b)| a - b).collect();
        for (&i, &v) in idx.iter().zip(&new) {
            self.x[i] = v;
        }
        self.quad.add_columns(idx, &delta, &mut self.hx);
        if let Some(a) = self.data.a {
            for (&j, &d) in idx.iter().zip(&delta) {
                a.col_axpy(j, d, &mut self.r);
            }
        }
        Ok(())
    }

    /// `y ← y − β(Ax − b)`
    pub fn dual_step(&mut self) {
        for (yi, ri) in self.y.iter_mut().zip(&self.r) {
            *yi -= self.beta * ri;
        }
    }

    /// One Gauss–Seidel pass over `order` followed by one dual step.
    pub fn sweep(&mut self, order: &UpdateOrder) -> Result<()> {
        for group in order.groups() {
            self.minimize_block(group)?;
        }
        self.dual_step();
        Ok(())
    }

    /// Residuals at the current iterate given the previous primal point.
    pub fn residuals(&mut self, x_prev: &[f64]) -> ResidualPair {
        self.refresh();
        residual::residuals_from_parts(
            &self.x,
            x_prev,
            &self.y,
            &self.hx,
            &self.r,
            self.data,
            self.beta,
        )
    }
}

/// State handed to a sweep observer.
pub struct SweepEvent<'e> {
    /// 1-based sweep count.
    pub iteration: usize,
    pub order: &'e UpdateOrder,
    pub x: &'e [f64],
    pub y: &'e [f64],
    pub residuals: &'e ResidualPair,
}

/// The block subproblem over `block` at `(x, y)`, built from scratch.
pub fn assemble_block_system(
    problem: &QpProblem,
    x: &[f64],
    y: &[f64],
    block: &[usize],
    beta: f64,
) -> Result<BlockSystem> {
    let n = problem.n();
    if x.len() != n || y.len() != problem.m() {
        return Err(dims("x or y has the wrong length"));
    }
    if block.iter().any(|&i| i >= n) {
        return Err(dims("block index out of range"));
    }
    let mut engine = Engine::for_problem(problem, beta)?;
    engine.set_state(x, y)?;
    Ok(engine.block_system(block))
}

/// `y − β(Ax − b)`
pub fn dual_update(y: &[f64], a: &Matrix, x: &[f64], b: &[f64], beta: f64) -> Result<Vec<f64>> {
    if a.rows() != y.len() || a.rows() != b.len() || a.cols() != x.len() {
        return Err(dims("dual update operands disagree in size"));
    }
    let mut ax = vec![0.0; b.len()];
    a.mul_vec(x, &mut ax);
    Ok(y.iter()
        .zip(ax.iter().zip(b))
        .map(|(yi, (axi, bi))| yi - beta * (axi - bi))
        .collect())
}

pub fn solve(problem: &QpProblem, config: &SolverConfig) -> Result<SolveResult> {
    solve_observed(problem, config, |_| {})
}

/// [`solve`], calling `observer` after every sweep.
pub fn solve_observed(
    problem: &QpProblem,
    config: &SolverConfig,
    observer: impl FnMut(&SweepEvent<'_>),
) -> Result<SolveResult> {
    let engine = Engine::for_problem(problem, config.beta_penalty)?;
    run(engine, config, observer)
}

/// Drives an engine through the sweep loop selected by `config`.
pub fn run<Q: QuadraticTerm>(
    mut engine: Engine<'_, Q>,
    config: &SolverConfig,
    mut observer: impl FnMut(&SweepEvent<'_>),
) -> Result<SolveResult> {
    let n = engine.x.len();
    config.validate(n)?;
    if config.beta_penalty != engine.beta {
        return Err(invalid("engine penalty differs from config penalty"));
    }
    let mut rng = rng_from_seed(config.seed);
    let fixed = partition_with(n, config.block_size, None)?;
    if config.mode != Mode::Rac {
        engine.enable_factor_cache();
    }

    let x0 = engine.x.clone();
    let initial = engine.residuals(&x0).primal;
    let blowup = DIVERGENCE_FACTOR * initial.max(1.0);

    let mut result = SolveResult {
        x: Vec::new(),
        y: Vec::new(),
        iterations: 0,
        primal_residual_history: Vec::new(),
        primal_l1_history: Vec::new(),
        dual_residual_history: Vec::new(),
        status: Status::MaxIters,
    };
    let mut x_prev = x0;
    for k in 1..=config.max_iters {
        let order = match config.mode {
            Mode::Rac => partition_with(n, config.block_size, Some(&mut rng))?.in_order(),
            Mode::Rp => fixed.permuted(&mut rng),
            Mode::Cyclic => fixed.in_order(),
        };
        engine.sweep(&order)?;
        let res = engine.residuals(&x_prev);
        x_prev.copy_from_slice(&engine.x);

        result.iterations = k;
        result.primal_residual_history.push(res.primal);
        result.primal_l1_history.push(res.primal_l1);
        result.dual_residual_history.push(res.dual);
        observer(&SweepEvent {
            iteration: k,
            order: &order,
            x: &engine.x,
            y: &engine.y,
            residuals: &res,
        });

        if !res.primal.is_finite() || res.primal > blowup || engine.x.iter().any(|v| !v.is_finite()) {
            result.status = Status::Diverged;
            break;
        }
        let within = res.primal <= config.tol_primal && res.dual <= config.tol_dual;
        if within {
            result.status = Status::Converged;
            if !config.fixed_iterations {
                break;
            }
        } else {
            result.status = Status::MaxIters;
        }
    }
    result.x = engine.x;
    result.y = engine.y;
    Ok(result)
}

#[cfg(test)]
mod tests;
