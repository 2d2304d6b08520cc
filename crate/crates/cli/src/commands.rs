//! Subcommand handlers. Each builds a run record, prints it and reports
//! whether the requested tolerances were met.

use std::error::Error as StdError;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use racml::config::{Mode, SolverConfig, Status};
use racml::data::{
    gen_blobs, gen_qp, gen_regression, load_qp_manifest, parse_libsvm, write_libsvm, write_qp_manifest,
    write_vector, Dataset, GeneratorManifest,
};
use racml::elastic_net::{self, BlockMode, ElasticNetSpec, Gamma};
use racml::spectral::{certify, dense_parts};
use racml::svm::{self, KernelSpec};
use serde_json::json;

use crate::record::RunRecord;
use crate::{
    CertifyArgs, Command, EnetCommand, EnetEvalArgs, EnetFitArgs, EnetModeArg, GenBlobsArgs, GenCommand,
    GenQpArgs, GenRegressionArgs, KernelArg, ModeArg, QpCommand, QpSolveArgs, SpectralCommand, SvmCommand,
    SvmGridArgs, SvmPredictArgs, SvmSolverArgs, SvmTrainArgs,
};

type CliResult<T> = Result<T, Box<dyn StdError>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::NotConverged => 1,
        }
    }
}

pub fn run(command: Command, argv: &[String]) -> CliResult<Outcome> {
    let start = Instant::now();
    let (mut record, outcome, out) = match command {
        Command::Qp(QpCommand::Solve(a)) => {
            let out = a.out.clone();
            let (r, o) = qp_solve(a, argv)?;
            (r, o, out)
        }
        Command::ElasticNet(EnetCommand::Fit(a)) => with_none(enet_fit(a, argv)?),
        Command::ElasticNet(EnetCommand::Eval(a)) => with_none(enet_eval(a, argv)?),
        Command::Svm(SvmCommand::Train(a)) => with_none(svm_train(a, argv)?),
        Command::Svm(SvmCommand::Predict(a)) => with_none(svm_predict(a, argv)?),
        Command::Svm(SvmCommand::Grid(a)) => with_none(svm_grid(a, argv)?),
        Command::Spectral(SpectralCommand::Certify(a)) => with_none(spectral_certify(a, argv)?),
        Command::Gen(GenCommand::Regression(a)) => with_none(gen_regression_cmd(a, argv)?),
        Command::Gen(GenCommand::Blobs(a)) => with_none(gen_blobs_cmd(a, argv)?),
        Command::Gen(GenCommand::Qp(a)) => with_none(gen_qp_cmd(a, argv)?),
    };
    record.wall_seconds = start.elapsed().as_secs_f64();
    if let Some(path) = &out {
        record.artifact(path);
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, &record)?;
        f.write_all(b"\n")?;
        f.flush()?;
    }
    println!("{}", serde_json::to_string_pretty(&record)?);
    Ok(outcome)
}

fn with_none((r, o): (RunRecord, Outcome)) -> (RunRecord, Outcome, Option<std::path::PathBuf>) {
    (r, o, None)
}

fn read_libsvm(path: &Path, features: Option<usize>) -> CliResult<Dataset> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_libsvm(BufReader::new(file), features).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Converged => "converged",
        Status::MaxIters => "max_iters",
        Status::Diverged => "diverged",
    }
}

/// Non-convergence counts only when the user asked for tolerances.
fn solver_outcome(status: Status, tolerances_requested: bool) -> Outcome {
    match status {
        Status::Converged => Outcome::Success,
        Status::Diverged => Outcome::NotConverged,
        Status::MaxIters if tolerances_requested => Outcome::NotConverged,
        Status::MaxIters => Outcome::Success,
    }
}

fn qp_solve(a: QpSolveArgs, argv: &[String]) -> CliResult<(RunRecord, Outcome)> {
    let problem = load_qp_manifest(&a.manifest).map_err(|e| format!("{}: {e}", a.manifest.display()))?;
    let report = problem.validate();
    if !report.is_valid() {
        return Err(format!("{}: {report}", a.manifest.display()).into());
    }
    let config = SolverConfig {
        mode: match a.mode {
            ModeArg::Rac => Mode::Rac,
            ModeArg::Rp => Mode::Rp,
            ModeArg::Cyclic => Mode::Cyclic,
        },
        block_size: a.block_size.unwrap_or(problem.n()),
        beta_penalty: a.beta,
        max_iters: a.max_iter,
        tol_primal: a.tol_primal.unwrap_or(1e-6),
        tol_dual: a.tol_dual.unwrap_or(1e-6),
        seed: a.seed,
        fixed_iterations: false,
    };
    let result = racml::solve(&problem, &config)?;
    let mut rec = RunRecord::new(argv, serde_json::to_value(&config)?, Some(a.seed));
    rec.status = status_name(result.status).into();
    rec.iterations = Some(result.iterations);
    rec.residuals = json!({ "primal": result.final_primal(), "dual": result.final_dual() });
    rec.metrics = json!({ "objective": problem.objective(&result.x) });
    rec.result = json!({ "x": result.x, "y": result.y });
    let requested = a.tol_primal.is_some() || a.tol_dual.is_some();
    Ok((rec, solver_outcome(result.status, requested)))
}

fn enet_fit(a: EnetFitArgs, argv: &[String]) -> CliResult<(RunRecord, Outcome)> {
    let data = read_libsvm(&a.data, None)?;
    let gamma: Gamma = a.gamma.parse()?;
    let spec = ElasticNetSpec {
        lambda: a.lambda,
        alpha: a.alpha,
        gamma,
        block_size: a.block_size,
        iters: a.iters,
        mode: if a.mode == EnetModeArg::Rp { BlockMode::Rp } else { BlockMode::Rac },
        seed: a.seed,
        tol: a.tol,
    };
    let model = match a.mode {
        EnetModeArg::Consensus => elastic_net::consensus_fit(&data.x, &data.y, &spec)?,
        _ => elastic_net::fit(&data.x, &data.y, &spec)?,
    };
    elastic_net::save_model(&model, &a.model)?;
    let metrics = elastic_net::evaluate(&model, &data.x, &data.y)?;
    let mut config = serde_json::to_value(&spec)?;
    config["solver"] = json!(match a.mode {
        EnetModeArg::Rac => "rac",
        EnetModeArg::Rp => "rp",
        EnetModeArg::Consensus => "consensus",
    });
    config["gamma_resolved"] = json!(model.gamma);
    let mut rec = RunRecord::new(argv, config, Some(a.seed));
    let converged = a.tol.is_none_or(|t| model.residual <= t);
    rec.status = if a.tol.is_none() {
        "fixed_iterations".into()
    } else if converged {
        "converged".into()
    } else {
        "max_iters".into()
    };
    rec.iterations = Some(model.iterations);
    rec.residuals = json!({ "split_l1": model.residual });
    rec.metrics = json!({
        "l2_loss": metrics.l2_loss,
        "model_error": metrics.model_error,
        "objective": elastic_net::objective(&data.x, &data.y, &model.beta, a.lambda, a.alpha),
        "nonzeros": model.z.iter().filter(|v| **v != 0.0).count(),
    });
    rec.artifact(&a.model);
    rec.result = json!({ "n": data.n(), "p": data.feature_count() });
    Ok((rec, if converged { Outcome::Success } else { Outcome::NotConverged }))
}

fn enet_eval(a: EnetEvalArgs, argv: &[String]) -> CliResult<(RunRecord, Outcome)> {
    let model = elastic_net::load_model(&a.model)?;
    let data = read_libsvm(&a.data, Some(model.feature_count()))?;
    let metrics = elastic_net::evaluate(&model, &data.x, &data.y)?;
    let spec = &model.spec;
    let mut rec = RunRecord::new(argv, json!({ "model": a.model, "data": a.data }), Some(spec.seed));
    rec.metrics = json!({
        "l2_loss": metrics.l2_loss,
        "model_error": metrics.model_error,
        "objective": elastic_net::objective(&data.x, &data.y, &model.beta, spec.lambda, spec.alpha),
    });
    rec.result = json!({ "n": data.n(), "p": data.feature_count() });
    Ok((rec, Outcome::Success))
}

fn svm_config(s: &SvmSolverArgs, n: usize, seed: u64) -> SolverConfig {
    let mut cfg = svm::default_config(n);
    if let Some(b) = s.block_size {
        cfg.block_size = b;
    }
    cfg.beta_penalty = s.beta.unwrap_or_else(|| svm::default_penalty(n, cfg.block_size));
    cfg.max_iters = s.max_iter;
    if let Some(t) = s.tol_primal {
        cfg.tol_primal = t;
    }
    if let Some(t) = s.tol_dual {
        cfg.tol_dual = t;
    }
    cfg.seed = seed;
    cfg
}

fn kernel_of(kind: KernelArg, sigma: f64) -> KernelSpec {
    match kind {
        KernelArg::Gaussian => KernelSpec::Gaussian { sigma },
        KernelArg::Linear => KernelSpec::Linear,
    }
}

fn svm_train(a: SvmTrainArgs, argv: &[String]) -> CliResult<(RunRecord, Outcome)> {
    let data = read_libsvm(&a.data, None)?;
    let config = svm_config(&a.solver, data.n(), a.seed);
    let kernel = kernel_of(a.kernel, a.sigma);
    let (model, result) = svm::train(&data, a.c, kernel, &config)?;
    svm::save_model(&model, &a.model)?;
    let mut cfg = serde_json::to_value(&config)?;
    cfg["C"] = json!(a.c);
    cfg["kernel"] = serde_json::to_value(kernel)?;
    let mut rec = RunRecord::new(argv, cfg, Some(a.seed));
    rec.status = status_name(result.status).into();
    rec.iterations = Some(result.iterations);
    rec.residuals = json!({ "primal": result.final_primal(), "dual": result.final_dual() });
    rec.metrics = json!({
        "train_accuracy": svm::accuracy(&model, &data.x, &data.y)?,
        "dual_objective": svm::dual_objective(&result.x, &data, &kernel)?,
    });
    rec.artifact(&a.model);
    rec.result = json!({ "n_sv": model.support_duals.len(), "bias": model.bias });
    let requested = a.solver.tol_primal.is_some() || a.solver.tol_dual.is_some();
    Ok((rec, solver_outcome(result.status, requested)))
}

fn svm_predict(a: SvmPredictArgs, argv: &[String]) -> CliResult<(RunRecord, Outcome)> {
    let model = svm::load_model(&a.model)?;
    let data = read_libsvm(&a.data, Some(model.feature_count))?;
    let predictions = svm::predict(&model, &data.x)?;
    let mut rec = RunRecord::new(argv, json!({ "model": a.model, "data": a.data, "labels": a.labels }), None);
    if a.labels {
        rec.metrics = json!({ "accuracy": svm::accuracy(&model, &data.x, &data.y)? });
    }
    rec.result = json!({ "predictions": predictions });
    Ok((rec, Outcome::Success))
}

fn svm_grid(a: SvmGridArgs, argv: &[String]) -> CliResult<(RunRecord, Outcome)> {
    let data = read_libsvm(&a.data, None)?;
    let n_hold = ((a.holdout * data.n() as f64).round() as usize).clamp(1, data.n().max(2) - 1);
    let train_n = data.n().saturating_sub(n_hold);
    let config = svm_config(&a.solver, train_n.max(1), a.seed);
    let grid = svm::grid_search(&data, &a.c_grid, &a.sigma_grid, a.holdout, &config, a.seed, a.threads)?;
    let mut cfg = serde_json::to_value(&config)?;
    cfg["c_grid"] = json!(a.c_grid);
    cfg["sigma_grid"] = json!(a.sigma_grid);
    cfg["holdout"] = json!(a.holdout);
    cfg["threads"] = json!(a.threads);
    let mut rec = RunRecord::new(argv, cfg, Some(a.seed));
    rec.metrics = json!({ "best_accuracy": grid.best.accuracy });
    rec.result = serde_json::to_value(&grid)?;
    Ok((rec, Outcome::Success))
}

fn spectral_certify(a: CertifyArgs, argv: &[String]) -> CliResult<(RunRecord, Outcome)> {
    let problem = load_qp_manifest(&a.manifest).map_err(|e| format!("{}: {e}", a.manifest.display()))?;
    let (h, am) = dense_parts(&problem);
    let cert = certify(&h, &am, a.beta, a.blocks, a.kron)?;
    let config = json!({ "manifest": a.manifest, "beta": a.beta, "blocks": a.blocks, "kron": a.kron });
    let mut rec = RunRecord::new(argv, config, None);
    rec.metrics = json!({
        "lemma2_ok": cert.lemma2_ok,
        "assumption1_ok": cert.assumption1_ok,
        "rho_kron": cert.rho_kron,
    });
    rec.result = serde_json::to_value(&cert)?;
    Ok((rec, Outcome::Success))
}

fn write_dataset(d: &Dataset, path: &Path) -> CliResult<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_libsvm(d, &mut out)?;
    out.flush()?;
    Ok(())
}

fn generated(argv: &[String], manifest: GeneratorManifest) -> CliResult<RunRecord> {
    let seed = manifest.seed;
    let value = serde_json::to_value(&manifest)?;
    let mut rec = RunRecord::new(argv, value.clone(), Some(seed));
    rec.result = value;
    Ok(rec)
}

fn gen_regression_cmd(a: GenRegressionArgs, argv: &[String]) -> CliResult<(RunRecord, Outcome)> {
    let (data, beta) = gen_regression(a.n, a.p, a.x_density, a.coef_density, a.noise_sd, a.seed)?;
    let manifest = GeneratorManifest::regression(a.n, a.p, a.x_density, a.coef_density, a.noise_sd, a.seed);
    let mut rec = generated(argv, manifest)?;
    write_dataset(&data, &a.out)?;
    rec.artifact(&a.out);
    if let Some(path) = &a.beta_out {
        let mut out = BufWriter::new(File::create(path)?);
        write_vector(&beta, &mut out)?;
        out.flush()?;
        rec.artifact(path);
    }
    Ok((rec, Outcome::Success))
}

fn gen_blobs_cmd(a: GenBlobsArgs, argv: &[String]) -> CliResult<(RunRecord, Outcome)> {
    let data = gen_blobs(a.n_per_class, a.dim, a.center_distance, a.seed)?;
    let mut rec = generated(argv, GeneratorManifest::blobs(a.n_per_class, a.dim, a.center_distance, a.seed))?;
    write_dataset(&data, &a.out)?;
    rec.artifact(&a.out);
    Ok((rec, Outcome::Success))
}

fn gen_qp_cmd(a: GenQpArgs, argv: &[String]) -> CliResult<(RunRecord, Outcome)> {
    let problem = gen_qp(a.n, a.m, a.zero_h, a.seed)?;
    let mut rec = generated(argv, GeneratorManifest::qp(a.n, a.m, a.zero_h, a.seed))?;
    write_qp_manifest(&problem, &a.out)?;
    rec.artifact(&a.out);
    Ok((rec, Outcome::Success))
}
