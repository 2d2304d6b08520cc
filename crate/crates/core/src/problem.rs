//! Linearly constrained, box-bounded convex QP:
//!
//! ```text
//!     minimize    ½ xᵀ H x + cᵀ x
//!     subject to  A x = b,  lower ≤ x ≤ upper
//! ```

use std::fmt;

use crate::linalg::Matrix;

/// Relative tolerance used for the symmetry check on `H`.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    /// Quadratic term; `None` means zero.
    pub h: Option<Matrix>,
    pub c: Vec<f64>,
    /// Equality constraints; `None` means no constraints (m = 0).
    pub a: Option<Matrix>,
    pub b: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl QpProblem {
    /// Unconstrained, unbounded problem over `c.len()` variables.
    pub fn new(h: Option<Matrix>, c: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            h,
            c,
            a: None,
            b: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn with_constraints(mut self, a: Matrix, b: Vec<f64>) -> Self {
        self.a = Some(a);
        self.b = b;
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn has_bounds(&self) -> bool {
        self.lower.iter().any(|l| l.is_finite()) || self.upper.iter().any(|u| u.is_finite())
    }

    /// Box projection of a single coordinate.
    #[inline]
    pub fn clamp(&self, i: usize, v: f64) -> f64 {
        v.max(self.lower[i]).min(self.upper[i])
    }

    pub fn validate(&self) -> ValidationReport {
        validate_problem(self)
    }

    /// `½ xᵀHx + cᵀx`
    pub fn objective(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.c.iter().zip(x).map(|(c, v)| c * v).sum();
        let quad = self.h.as_ref().map_or(0.0, |h| {
            let mut hx = vec![0.0; x.len()];
            h.mul_vec(x, &mut hx);
            hx.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        });
        0.5 * quad + lin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Dimension(String),
    Asymmetric { relative: f64 },
    BoundOrder { index: usize, lower: f64, upper: f64 },
    NonFinite(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimension(s) => write!(f, "dimension mismatch: {s}"),
            Violation::Asymmetric { relative } => {
                write!(f, "H is not symmetric (relative asymmetry {relative:e})")
            }
            Violation::BoundOrder { index, lower, upper } => {
                write!(f, "lower[{index}] = {lower} exceeds upper[{index}] = {upper}")
            }
            Violation::NonFinite(s) => write!(f, "non-finite value in {s}"),
        }
    }
}

/// Every invariant a problem violates; empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

pub fn validate_problem(p: &QpProblem) -> ValidationReport {
    let mut out = Vec::new();
    let n = p.n();
    let m = p.m();

    if let Some(h) = &p.h {
        if h.rows() != n || h.cols() != n {
            out.push(Violation::Dimension(format!(
                "H is {}x{}, expected {n}x{n}",
                h.rows(),
                h.cols()
            )));
        } else {
            let rel = h.asymmetry();
            if rel > SYMMETRY_TOL {
                out.push(Violation::Asymmetric { relative: rel });
            }
        }
    }
    match &p.a {
        Some(a) => {
            if a.rows() != m || a.cols() != n {
                out.push(Violation::Dimension(format!(
                    "A is {}x{}, expected {m}x{n}",
                    a.rows(),
                    a.cols()
                )));
            }
        }
        None if m > 0 => out.push(Violation::Dimension(format!(
            "b has {m} entries but A is absent"
        ))),
        None => {}
    }
    if p.lower.len() != n {
        out.push(Violation::Dimension(format!("lower has {} entries, expected {n}", p.lower.len())));
    }
    if p.upper.len() != n {
        out.push(Violation::Dimension(format!("upper has {} entries, expected {n}", p.upper.len())));
    }
    if p.c.iter().any(|v| !v.is_finite()) {
        out.push(Violation::NonFinite("c".into()));
    }
    if p.b.iter().any(|v| !v.is_finite()) {
        out.push(Violation::NonFinite("b".into()));
    }
    if p.lower.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        out.push(Violation::NonFinite("lower".into()));
    }
    if p.upper.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
        out.push(Violation::NonFinite("upper".into()));
    }
    for (i, (&l, &u)) in p.lower.iter().zip(&p.upper).enumerate() {
        if l > u {
            out.push(Violation::BoundOrder { index: i, lower: l, upper: u });
        }
    }
    ValidationReport { violations: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn dense(rows: &[Vec<f64>]) -> Matrix {
        DenseMatrix::from_rows(rows).unwrap().into()
    }

    #[test]
    fn objective_by_hand() {
        let p = QpProblem::new(Some(dense(&[vec![2.0, 1.0], vec![1.0, 4.0]])), vec![1.0, -1.0]);
        // ½(2·1 + 2·1·(−2) + 4·4) + (1 + 2) = 7 + 3
        assert_eq!(p.objective(&[1.0, -2.0]), 10.0);
        assert_eq!(QpProblem::new(None, vec![3.0]).objective(&[2.0]), 6.0);
    }

    #[test]
    fn consistent_problem_is_valid() {
        let p = QpProblem::new(Some(dense(&[vec![1.0, 0.0], vec![0.0, 1.0]])), vec![0.0, 0.0])
            .with_constraints(dense(&[vec![1.0, 1.0]]), vec![2.0]);
        assert!(p.validate().is_valid());
    }

    #[test]
    fn asymmetric_h_is_reported() {
        let p = QpProblem::new(Some(dense(&[vec![1.0, 2.0], vec![0.0, 1.0]])), vec![0.0, 0.0]);
        let r = p.validate();
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Asymmetric { .. })));
    }

    #[test]
    fn bound_order_is_reported() {
        let p = QpProblem::new(None, vec![0.0]).with_bounds(vec![1.0], vec![0.0]);
        assert_eq!(
            p.validate().violations,
            vec![Violation::BoundOrder { index: 0, lower: 1.0, upper: 0.0 }]
        );
    }

    #[test]
    fn reports_every_violation() {
        let p = QpProblem::new(Some(dense(&[vec![1.0]])), vec![0.0, f64::NAN])
            .with_constraints(dense(&[vec![1.0]]), vec![1.0, 2.0])
            .with_bounds(vec![0.0], vec![1.0, 1.0]);
        assert!(p.validate().violations.len() >= 4);
    }
}
