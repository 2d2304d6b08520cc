//! Randomly assembled cyclic multi-block ADMM (RAC-ADMM) for linearly
//! constrained, box-bounded convex quadratic programs, with elastic-net and
//! C-SVC frontends and a small-instance spectral toolkit for the iteration's
//! linear-system view.

pub mod config;
pub mod data;
pub mod elastic_net;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod partition;
pub mod problem;
pub mod spectral;
pub mod svm;

pub use config::{Mode, SolveResult, SolverConfig, Status};
pub use engine::{solve, Engine};
pub use error::{Error, Result};
pub use linalg::{DenseMatrix, Matrix, SparseMatrix};
pub use partition::{BlockPartition, UpdateOrder};
pub use problem::QpProblem;
