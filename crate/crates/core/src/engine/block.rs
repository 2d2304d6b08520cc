//! Exact minimization of one block of the augmented Lagrangian.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// `minimize ½ vᵀ·matrix·v − rhsᵀ v` over `lower ≤ v ≤ upper`.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BlockSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().any(|l| l.is_finite()) || self.upper.iter().any(|u| u.is_finite())
    }

    /// Smallest eigenvalue of the block matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(*v))
    }
}

pub(crate) fn factor(matrix: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let dim = matrix.nrows();
    Cholesky::new(matrix).ok_or_else(|| {
        Error::AssumptionViolation(format!(
            "{dim}x{dim} block matrix H_bb + beta A_b^T A_b is not positive definite"
        ))
    })
}

/// Exact minimizer of the block subproblem.
///
/// Unbounded blocks are solved by a Cholesky factorization. Bounded blocks
/// use a primal active-set method started from `start` (clamped into the
/// box); after `10·s` passes it falls back to projected gradient.
pub fn solve_block(sys: &BlockSystem) -> Result<Vec<f64>> {
    solve_block_from(sys, None, None)
}

pub(crate) fn solve_block_from(
    sys: &BlockSystem,
    start: Option<&[f64]>,
    chol: Option<&Cholesky<f64, Dyn>>,
) -> Result<Vec<f64>> {
    let s = sys.dim();
    if sys.matrix.nrows() != s || sys.matrix.ncols() != s || sys.lower.len() != s || sys.upper.len() != s {
        return Err(Error::DimensionMismatch("block system parts disagree in size".into()));
    }
    let rhs = DVector::from_column_slice(&sys.rhs);
    let owned;
    let chol = match chol {
        Some(c) => c,
        None => {
            owned = factor(sys.matrix.clone())?;
            &owned
        }
    };
    let unconstrained = chol.solve(&rhs);
    if !sys.is_bounded() {
        return Ok(unconstrained.as_slice().to_vec());
    }
    let inside = unconstrained
        .iter()
        .enumerate()
        .all(|(i, v)| *v >= sys.lower[i] && *v <= sys.upper[i]);
    if inside {
        return Ok(unconstrained.as_slice().to_vec());
    }
    let x0: Vec<f64> = match start {
        Some(x) => x.to_vec(),
        None => unconstrained.as_slice().to_vec(),
    };
    active_set(sys, &x0)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Bound {
    Free,
    Lower,
    Upper,
}

fn active_set(sys: &BlockSystem, x0: &[f64]) -> Result<Vec<f64>> {
    let s = sys.dim();
    let m = &sys.matrix;
    let (lo, hi) = (&sys.lower, &sys.upper);
    let mut x: Vec<f64> = (0..s).map(|i| x0[i].max(lo[i]).min(hi[i])).collect();
    let mut state: Vec<Bound> = (0..s)
        .map(|i| {
            if x[i] == lo[i] {
                Bound::Lower
            } else if x[i] == hi[i] {
                Bound::Upper
            } else {
                Bound::Free
            }
        })
        .collect();

    let scale = sys
        .rhs
        .iter()
        .chain(m.iter())
        .fold(1.0_f64, |a, v| a.max(v.abs()));
    let tol = 1e-13 * scale;

    for _ in 0..10 * s.max(1) {
        let free: Vec<usize> = (0..s).filter(|&i| state[i] == Bound::Free).collect();
        let mut blocked = false;
        if !free.is_empty() {
            // Minimize over the free set with the bound variables held fixed.
            let mff = DMatrix::from_fn(free.len(), free.len(), |a, b| m[(free[a], free[b])]);
            let mut rhs_f = DVector::from_fn(free.len(), |a, _| {
                let i = free[a];
                let mut v = sys.rhs[i];
                for j in 0..s {
                    if state[j] != Bound::Free {
                        v -= m[(i, j)] * x[j];
                    }
                }
                v
            });
            let chol = factor(mff)?;
            chol.solve_mut(&mut rhs_f);
            let step: Vec<f64> = free.iter().enumerate().map(|(a, &i)| rhs_f[a] - x[i]).collect();

            let mut alpha = 1.0;
            let mut blocking = None;
            for (a, &i) in free.iter().enumerate() {
                let d = step[a];
                if d < 0.0 && lo[i].is_finite() {
                    let t = (lo[i] - x[i]) / d;
                    if t < alpha {
                        alpha = t;
                        blocking = Some((i, Bound::Lower));
                    }
                } else if d > 0.0 && hi[i].is_finite() {
                    let t = (hi[i] - x[i]) / d;
                    if t < alpha {
                        alpha = t;
                        blocking = Some((i, Bound::Upper));
                    }
                }
            }
            let alpha = alpha.max(0.0);
            for (a, &i) in free.iter().enumerate() {
                x[i] = (x[i] + alpha * step[a]).max(lo[i]).min(hi[i]);
            }
            if let Some((i, b)) = blocking {
                x[i] = if b == Bound::Lower { lo[i] } else { hi[i] };
                state[i] = b;
                blocked = true;
            }
        }
        if blocked {
            continue;
        }

        // Stationary on the working set: release the worst wrong-signed bound.
        let grad = gradient(m, &sys.rhs, &x);
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..s {
            let violation = match state[i] {
                Bound::Lower if grad[i] < -tol => -grad[i],
                Bound::Upper if grad[i] > tol => grad[i],
                _ => continue,
            };
            if worst.map_or(true, |(_, w)| violation > w) {
                worst = Some((i, violation));
            }
        }
        match worst {
            Some((i, _)) => state[i] = Bound::Free,
            None => return Ok(x),
        }
    }
    Ok(projected_gradient(sys, x, 1e-10))
}

fn gradient(m: &DMatrix<f64>, rhs: &[f64], x: &[f64]) -> Vec<f64> {
    let s = rhs.len();
    (0..s)
        .map(|i| (0..s).map(|j| m[(i, j)] * x[j]).sum::<f64>() - rhs[i])
        .collect()
}

/// Projected gradient with step `1/L`, `L` the Frobenius norm bound.
fn projected_gradient(sys: &BlockSystem, mut x: Vec<f64>, tol: f64) -> Vec<f64> {
    let lip = sys.matrix.norm().max(f64::MIN_POSITIVE);
    let step = 1.0 / lip;
    for _ in 0..1_000_000 {
        let g = gradient(&sys.matrix, &sys.rhs, &x);
        let mut change: f64 = 0.0;
        for i in 0..x.len() {
            let next = (x[i] - step * g[i]).max(sys.lower[i]).min(sys.upper[i]);
            change = change.max((next - x[i]).abs());
            x[i] = next;
        }
        if change <= tol * step {
            break;
        }
    }
    x
}
