//! `racml`: solve QPs, fit elastic nets, train SVMs, certify small
//! instances and generate data from the command line.
//!
//! Every command prints one JSON run record on stdout. Exit codes: 0 on
//! success, 1 when a solve stops without meeting tolerances the user asked
//! for, 2 on usage, input or model errors.

mod commands;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "racml", version, about = "Randomly assembled cyclic ADMM for QPs, elastic net and SVM")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Box-constrained quadratic programs.
    #[command(subcommand)]
    Qp(QpCommand),
    /// Elastic-net regression.
    #[command(subcommand, name = "elastic-net")]
    ElasticNet(EnetCommand),
    /// C-SVC classification.
    #[command(subcommand)]
    Svm(SvmCommand),
    /// Convergence certificates for small instances.
    #[command(subcommand)]
    Spectral(SpectralCommand),
    /// Synthetic data.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Subcommand, Debug)]
pub enum QpCommand {
    /// Solve the QP described by a manifest.
    Solve(QpSolveArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ModeArg {
    Rac,
    Rp,
    Cyclic,
}

#[derive(Args, Debug)]
pub struct QpSolveArgs {
    /// QP manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "rac")]
    pub mode: ModeArg,
    /// Variables per block [default: n].
    #[arg(long)]
    pub block_size: Option<usize>,
    /// Augmented-Lagrangian penalty.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Maximum number of sweeps.
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Primal residual tolerance [default: 1e-6].
    #[arg(long)]
    pub tol_primal: Option<f64>,
    /// Dual residual tolerance [default: 1e-6].
    #[arg(long)]
    pub tol_dual: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the run record here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum EnetCommand {
    /// Fit a model on a LIBSVM file.
    Fit(EnetFitArgs),
    /// Loss of a saved model on a LIBSVM file.
    Eval(EnetEvalArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnetModeArg {
    Rac,
    Rp,
    Consensus,
}

#[derive(Args, Debug)]
pub struct EnetFitArgs {
    /// Training data (LIBSVM format).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Mix between ridge (0) and LASSO (1).
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Penalty of the split constraint, a number or `auto`.
    #[arg(long, default_value = "auto")]
    pub gamma: String,
    /// Maximum number of sweeps.
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    #[arg(long, default_value_t = 100)]
    pub block_size: usize,
    #[arg(long, value_enum, default_value = "rac")]
    pub mode: EnetModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop once the split residual falls to this value.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Where to save the model (JSON).
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Args, Debug)]
pub struct EnetEvalArgs {
    /// Saved model (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Evaluation data (LIBSVM format).
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum SvmCommand {
    /// Train a C-SVC on a LIBSVM file with ±1 labels.
    Train(SvmTrainArgs),
    /// Predict labels for a LIBSVM file.
    Predict(SvmPredictArgs),
    /// Holdout search over (C, sigma).
    Grid(SvmGridArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum KernelArg {
    Gaussian,
    Linear,
}

/// Solver flags shared by `svm train` and `svm grid`.
#[derive(Args, Debug)]
pub struct SvmSolverArgs {
    /// Variables per block [default: 100 below 30k points, 500 below 100k, else 1000].
    #[arg(long)]
    pub block_size: Option<usize>,
    /// Penalty [default: 0.1 * number of blocks].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Maximum number of sweeps.
    #[arg(long, default_value_t = 10)]
    pub max_iter: usize,
    /// Primal residual tolerance [default: 0.1].
    #[arg(long)]
    pub tol_primal: Option<f64>,
    /// Dual residual tolerance [default: 1].
    #[arg(long)]
    pub tol_dual: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SvmTrainArgs {
    /// Training data (LIBSVM format).
    #[arg(long)]
    pub data: PathBuf,
    /// Box bound on the duals.
    #[arg(long = "c", default_value_t = 1.0)]
    pub c: f64,
    /// Gaussian kernel width.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelArg,
    #[command(flatten)]
    pub solver: SvmSolverArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to save the model (JSON header plus sidecar).
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Args, Debug)]
pub struct SvmPredictArgs {
    /// Saved model (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Points to classify (LIBSVM format).
    #[arg(long)]
    pub data: PathBuf,
    /// Score predictions against the file's labels.
    #[arg(long)]
    pub labels: bool,
}

#[derive(Args, Debug)]
pub struct SvmGridArgs {
    /// Data to split (LIBSVM format).
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated C values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub c_grid: Vec<f64>,
    /// Comma-separated sigma values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sigma_grid: Vec<f64>,
    /// Share of points held out for scoring.
    #[arg(long, default_value_t = 0.3)]
    pub holdout: f64,
    #[command(flatten)]
    pub solver: SvmSolverArgs,
    /// Seed of the split; cell k trains with seed + k.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cells trained at once.
    #[arg(long, env = "RACML_THREADS", default_value_t = 1)]
    pub threads: usize,
}

#[derive(Subcommand, Debug)]
pub enum SpectralCommand {
    /// Expected-iteration-matrix certificate for the QP in a manifest.
    Certify(CertifyArgs),
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    /// QP manifest (JSON); only H and A are used.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Number of blocks; must divide n.
    #[arg(long)]
    pub blocks: usize,
    /// Also compute the spectral radius of E[M ⊗ M].
    #[arg(long)]
    pub kron: bool,
}

#[derive(Subcommand, Debug)]
pub enum GenCommand {
    /// Sparse linear regression data.
    Regression(GenRegressionArgs),
    /// Two Gaussian clusters labelled ±1.
    Blobs(GenBlobsArgs),
    /// Random QP with equality constraints.
    Qp(GenQpArgs),
}

#[derive(Args, Debug)]
pub struct GenRegressionArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    /// Probability that an entry of X is present.
    #[arg(long, default_value_t = 1.0)]
    pub x_density: f64,
    /// Probability that a true coefficient is nonzero.
    #[arg(long, default_value_t = 0.1)]
    pub coef_density: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output data (LIBSVM format).
    #[arg(long)]
    pub out: PathBuf,
    /// Output for the true coefficients, one per line.
    #[arg(long)]
    pub beta_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenBlobsArgs {
    #[arg(long)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 6.0)]
    pub center_distance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output data (LIBSVM format).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenQpArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Leave H out (a linear program).
    #[arg(long)]
    pub zero_h: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output manifest (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command, &argv[1..]) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
