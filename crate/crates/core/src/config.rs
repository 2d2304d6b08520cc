use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// How blocks are formed and ordered from sweep to sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Fresh random partition every sweep.
    Rac,
    /// Partition fixed once, group order reshuffled every sweep.
    Rp,
    /// Partition and order both fixed.
    Cyclic,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rac" => Ok(Mode::Rac),
            "rp" => Ok(Mode::Rp),
            "cyclic" => Ok(Mode::Cyclic),
            other => Err(format!("unknown mode '{other}' (expected rac, rp or cyclic)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub mode: Mode,
    pub block_size: usize,
    /// Augmented-Lagrangian penalty, also used as the dual step.
    pub beta_penalty: f64,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub seed: u64,
    /// Ignore the tolerances and run exactly `max_iters` sweeps.
    pub fixed_iterations: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Rac,
            block_size: 1,
            beta_penalty: 1.0,
            max_iters: 1000,
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            seed: 0,
            fixed_iterations: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.beta_penalty > 0.0 && self.beta_penalty.is_finite()) {
            return Err(invalid(format!("penalty must be positive, got {}", self.beta_penalty)));
        }
        if self.block_size == 0 || self.block_size > n {
            return Err(invalid(format!(
                "block size {} must lie in 1..={n}",
                self.block_size
            )));
        }
        if !(self.tol_primal > 0.0 && self.tol_dual > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIters,
    Diverged,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub iterations: usize,
    /// `‖Ax − b‖_∞` after each sweep.
    pub primal_residual_history: Vec<f64>,
    /// `‖Ax − b‖₁` after each sweep.
    pub primal_l1_history: Vec<f64>,
    pub dual_residual_history: Vec<f64>,
    pub status: Status,
}

impl SolveResult {
    pub fn final_primal(&self) -> f64 {
        self.primal_residual_history.last().copied().unwrap_or(f64::NAN)
    }

    pub fn final_dual(&self) -> f64 {
        self.dual_residual_history.last().copied().unwrap_or(f64::NAN)
    }
}
