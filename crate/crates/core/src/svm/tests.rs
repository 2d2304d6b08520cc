use super::grid::pick_best;
use super::*;
use crate::config::Status;
use crate::data::gen_blobs;
use crate::partition::rng_from_seed;
use rand::Rng;

fn dataset(points: &[Vec<f64>], labels: &[f64]) -> Dataset {
    Dataset::new(DenseMatrix::from_rows(points).unwrap().into(), labels.to_vec()).unwrap()
}

fn gaussian(sigma: f64) -> KernelSpec {
    KernelSpec::Gaussian { sigma }
}

#[test]
fn kernel_examples() {
    let x = [0.3, -1.2, 4.0];
    for sigma in [0.1, 1.0, 7.0] {
        assert_eq!(kernel_eval(&x, &x, &gaussian(sigma)).unwrap(), 1.0);
    }
    // ‖x − x'‖² = 2σ² with σ = 1.5
    let v = kernel_eval(&[0.0, 0.0], &[1.5, 1.5], &gaussian(1.5)).unwrap();
    assert!((v - (-1f64).exp()).abs() < 1e-15);
    assert!((v - 0.367879).abs() < 1e-6);
    assert_eq!(kernel_eval(&[1.0, 2.0], &[3.0, 4.0], &KernelSpec::Linear).unwrap(), 11.0);
    assert!(matches!(kernel_eval(&[1.0], &[1.0, 2.0], &KernelSpec::Linear), Err(Error::DimensionMismatch(_))));
    assert!(gaussian(0.0).validate().is_err());
}

fn random_rows(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = rng_from_seed(seed);
    let pts = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let y = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    (pts, y)
}

#[test]
fn block_assembly_examples() {
    let d = dataset(&[vec![0.0, 0.0], vec![1.0, 0.5]], &[1.0, -1.0]);
    let rows = d.sparse_rows();
    let k = gaussian(1.0);
    let single = assemble_kernel_block(&rows, &d.y, &[1], &k).unwrap();
    assert_eq!(single[(0, 0)], 1.0);
    let kappa = kernel_eval(&d.row(0), &d.row(1), &k).unwrap();
    let pair = assemble_kernel_block(&rows, &d.y, &[0, 1], &k).unwrap();
    assert_eq!(pair, nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, -kappa, -kappa, 1.0]));
}

#[test]
fn blocks_match_full_matrix_and_are_psd() {
    let (pts, y) = random_rows(50, 4, 1);
    let d = dataset(&pts, &y);
    let rows = d.sparse_rows();
    let k = gaussian(0.8);
    let full = nalgebra::DMatrix::from_fn(50, 50, |i, j| y[i] * y[j] * kernel_eval(&pts[i], &pts[j], &k).unwrap());
    let mut q = KernelQ::new(&rows, &y, k, 20).unwrap();
    let mut rng = rng_from_seed(2);
    for _ in 0..20 {
        let mut idx: Vec<usize> = (0..50).collect();
        crate::partition::shuffle(&mut idx, &mut rng);
        let block = &idx[..10];
        let direct = assemble_kernel_block(&rows, &y, block, &k).unwrap();
        let cached = crate::engine::QuadraticTerm::block(&mut q, block);
        for a in 0..10 {
            for b in 0..10 {
                let want = full[(block[a], block[b])];
                assert!((direct[(a, b)] - want).abs() <= 1e-14);
                let ridge = if a == b { KERNEL_RIDGE } else { 0.0 };
                assert!((cached[(a, b)] - want - ridge).abs() <= 1e-14);
            }
        }
        let min_eig = direct.symmetric_eigenvalues().min();
        assert!(min_eig >= -1e-9, "{min_eig}");
    }
    assert!(q.cached_rows() <= 20);
}

#[test]
fn row_cache_hits_on_repeat_blocks() {
    let (pts, y) = random_rows(30, 2, 3);
    let d = dataset(&pts, &y);
    let rows = d.sparse_rows();
    let mut q = KernelQ::new(&rows, &y, gaussian(1.0), 4).unwrap();
    let _ = q.row(0);
    let _ = q.row(1);
    let _ = q.row(0);
    assert_eq!(q.stats().hits, 1);
    assert_eq!(q.stats().misses, 2);
    for i in 2..10 {
        let _ = q.row(i);
    }
    assert_eq!(q.cached_rows(), 4);
    let _ = q.row(0);
    assert_eq!(q.stats().misses, 11, "row 0 should have been evicted");
}

fn tight_config(n: usize, s: usize, seed: u64) -> SolverConfig {
    SolverConfig {
        mode: Mode::Rac,
        block_size: s,
        beta_penalty: default_penalty(n, s),
        max_iters: 20_000,
        tol_primal: 1e-8,
        tol_dual: 1e-8,
        seed,
        fixed_iterations: false,
    }
}

#[test]
fn separable_four_points_train_perfectly() {
    let d = dataset(
        &[vec![-3.0, -3.0], vec![-3.5, -2.5], vec![3.0, 3.0], vec![2.5, 3.5]],
        &[-1.0, -1.0, 1.0, 1.0],
    );
    let (model, _) = train(&d, 1.0, gaussian(1.0), &default_config(4)).unwrap();
    assert_eq!(accuracy(&model, &d.x, &d.y).unwrap(), 100.0);
}

#[test]
fn blobs_generalize() {
    let train_set = gen_blobs(100, 2, 6.0, 10).unwrap();
    let test_set = gen_blobs(50, 2, 6.0, 11).unwrap();
    let (model, _) = train(&train_set, 1.0, gaussian(1.0), &default_config(200)).unwrap();
    let acc = accuracy(&model, &test_set.x, &test_set.y).unwrap();
    assert!(acc >= 99.0, "test accuracy {acc}");
}

fn thirty_points() -> Dataset {
    gen_blobs(15, 2, 2.0, 7).unwrap()
}

/// f(x_i) without the sign.
fn decision_on_training(model: &SvmModel, d: &Dataset) -> Vec<f64> {
    (0..d.n()).map(|i| decision_value(model, &d.row(i)).unwrap()).collect()
}

#[test]
fn tight_solve_satisfies_csvc_kkt() {
    let d = thirty_points();
    let c = 1.0;
    let (model, result) = train(&d, c, gaussian(1.0), &tight_config(30, 10, 5)).unwrap();
    assert_eq!(result.status, Status::Converged);
    let f = decision_on_training(&model, &d);
    let delta = MARGIN_DELTA * c;
    let mut margin = 0;
    for i in 0..d.n() {
        let (z, yf) = (result.x[i], d.y[i] * f[i]);
        if z > delta && z < c - delta {
            margin += 1;
            assert!((yf - 1.0).abs() <= 1e-3, "margin point {i}: y f = {yf}");
        } else if z <= delta {
            assert!(yf >= 1.0 - 1e-3, "free point {i}: y f = {yf}");
        } else {
            assert!(yf <= 1.0 + 1e-3, "bounded point {i}: y f = {yf}");
        }
    }
    assert!(margin > 0);

    // The averaged bias agrees with the bias from any single margin vector.
    let rows = d.sparse_rows();
    for i in (0..d.n()).filter(|&i| result.x[i] > delta && result.x[i] < c - delta) {
        let fi: f64 = (0..d.n())
            .map(|j| d.y[j] * result.x[j] * kernel::KernelSpec::eval_sparse(&gaussian(1.0), &rows[j], &rows[i]))
            .sum();
        assert!((d.y[i] - fi - model.bias).abs() <= 1e-6);
    }
}

#[test]
fn duals_stay_feasible_every_sweep() {
    let d = thirty_points();
    let c = 0.5;
    let mut sweeps = 0;
    train_observed(&d, c, gaussian(1.0), &tight_config(30, 7, 1), |_, z| {
        sweeps += 1;
        assert!(z.iter().all(|&v| (0.0..=c).contains(&v)));
    })
    .unwrap();
    assert!(sweeps > 0);
}

#[test]
fn restarts_reach_the_same_dual_objective() {
    let d = thirty_points();
    let k = gaussian(1.0);
    let (_, reference) = train(&d, 1.0, k, &tight_config(30, 10, 0)).unwrap();
    let f_ref = dual_objective(&reference.x, &d, &k).unwrap();
    for seed in 1..=50 {
        let (_, r) = train(&d, 1.0, k, &tight_config(30, 10, seed)).unwrap();
        let f = dual_objective(&r.x, &d, &k).unwrap();
        assert!(f >= f_ref - 1e-6, "seed {seed}: {f} < {f_ref}");
    }
}

#[test]
fn symmetric_pair_has_zero_bias() {
    let d = dataset(&[vec![1.0], vec![-1.0]], &[1.0, -1.0]);
    let b = compute_bias(&[0.5, 0.5], &d, 1.0, &KernelSpec::Linear).unwrap();
    assert!(b.abs() < 1e-15);
    let (model, _) = train(&d, 1.0, KernelSpec::Linear, &tight_config(2, 1, 0)).unwrap();
    assert!(model.bias.abs() < 1e-6, "{}", model.bias);
}

#[test]
fn bias_without_margin_vectors_uses_kkt_interval() {
    let d = dataset(&[vec![1.0], vec![-1.0]], &[1.0, -1.0]);
    // Both duals at C = 0.25: f = ±0.5, b must satisfy y(f + b) ≤ 1 on both.
    let b = compute_bias(&[0.25, 0.25], &d, 0.25, &KernelSpec::Linear).unwrap();
    assert!(b.abs() < 1e-15);
    assert!(matches!(
        compute_bias(&[0.0, 0.0], &d, 1.0, &KernelSpec::Linear),
        Err(Error::ModelDegenerate(_))
    ));
}

#[test]
fn linear_boundary_translates_with_the_data() {
    let base = [-3.0, -2.0, -1.5, 1.0, 2.0, 2.5];
    let labels = [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0];
    let probes = [-1.0, -0.3, -0.2, 0.0, 0.2, 0.5, 0.9];
    let fit = |t: f64| {
        let pts: Vec<Vec<f64>> = base.iter().map(|v| vec![v + t]).collect();
        let d = dataset(&pts, &labels);
        train(&d, 10.0, KernelSpec::Linear, &tight_config(6, 2, 3)).unwrap().0
    };
    let m0 = fit(0.0);
    let m5 = fit(5.0);
    let shifted: Vec<Vec<f64>> = probes.iter().map(|p| vec![p + 5.0]).collect();
    let plain: Vec<Vec<f64>> = probes.iter().map(|p| vec![*p]).collect();
    let p0 = predict(&m0, &DenseMatrix::from_rows(&plain).unwrap().into()).unwrap();
    let p5 = predict(&m5, &DenseMatrix::from_rows(&shifted).unwrap().into()).unwrap();
    assert_eq!(p0, p5);
    // Boundary midway between −1.5 and 1.0.
    let f0 = decision_value(&m0, &[-0.25]).unwrap();
    let f5 = decision_value(&m5, &[4.75]).unwrap();
    assert!(f0.abs() < 1e-4 && f5.abs() < 1e-4, "{f0} {f5}");
}

#[test]
fn prediction_rules() {
    let d = dataset(&[vec![-2.0], vec![-1.0], vec![1.0], vec![2.0], vec![3.0]], &[-1.0, -1.0, 1.0, 1.0, 1.0]);
    let (mut model, _) = train(&d, 1.0, gaussian(1.0), &tight_config(5, 2, 0)).unwrap();
    assert_eq!(predict(&model, &d.x).unwrap(), d.y);
    assert_eq!(accuracy(&model, &d.x, &d.y).unwrap(), 100.0);

    model.bias = 1e9;
    assert_eq!(accuracy(&model, &d.x, &d.y).unwrap(), 60.0);
    model.bias = -1e9;
    assert_eq!(accuracy(&model, &d.x, &d.y).unwrap(), 40.0);

    // A decision value of exactly zero is labelled +1.
    let zero = SvmModel {
        support_points: vec![],
        support_duals: vec![],
        support_labels: vec![],
        bias: 0.0,
        kernel: KernelSpec::Linear,
        c: 1.0,
        feature_count: 1,
    };
    assert_eq!(predict(&zero, &d.x).unwrap(), vec![1.0; 5]);
}

#[test]
fn predictions_ignore_support_order() {
    let d = thirty_points();
    let (model, _) = train(&d, 1.0, gaussian(1.0), &tight_config(30, 10, 2)).unwrap();
    let mut reversed = model.clone();
    reversed.support_points.reverse();
    reversed.support_duals.reverse();
    reversed.support_labels.reverse();
    let probe = gen_blobs(20, 2, 2.0, 99).unwrap();
    assert_eq!(predict(&model, &probe.x).unwrap(), predict(&reversed, &probe.x).unwrap());
}

#[test]
fn non_binary_labels_are_rejected() {
    let d = dataset(&[vec![0.0], vec![1.0]], &[1.0, 2.0]);
    assert!(matches!(train(&d, 1.0, gaussian(1.0), &default_config(2)), Err(Error::InvalidArgument(_))));
}

#[test]
fn grid_single_cell_and_ties() {
    let d = gen_blobs(30, 2, 6.0, 4).unwrap();
    let cfg = default_config(60);
    let r = grid_search(&d, &[1.0], &[1.0], 0.3, &cfg, 0, 1).unwrap();
    assert_eq!((r.best.c, r.best.sigma), (1.0, 1.0));
    assert_eq!(r.table.len(), 1);
    assert_eq!((r.train_size, r.holdout_size), (42, 18));

    let cell = |c, sigma, accuracy| GridCell { c, sigma, accuracy };
    let table = [cell(10.0, 0.1, 90.0), cell(1.0, 10.0, 90.0), cell(1.0, 1.0, 90.0), cell(0.1, 1.0, 80.0)];
    assert_eq!(pick_best(&table), cell(1.0, 1.0, 90.0));
}

#[test]
fn grid_is_deterministic_and_argmax_consistent() {
    let d = gen_blobs(40, 2, 3.0, 5).unwrap();
    let cfg = default_config(80);
    let grid = [0.1, 1.0, 10.0];
    let a = grid_search(&d, &grid, &grid, 0.3, &cfg, 9, 1).unwrap();
    let b = grid_search(&d, &grid, &grid, 0.3, &cfg, 9, 3).unwrap();
    assert_eq!(a, b);
    let top = a.table.iter().map(|c| c.accuracy).fold(0.0, f64::max);
    assert_eq!(a.best.accuracy, top);
}

#[test]
fn single_class_training_split_is_rejected() {
    let d = dataset(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]], &[1.0, 1.0, 1.0, -1.0]);
    let cfg = default_config(4);
    let mut saw_error = false;
    for seed in 0..20 {
        if let Err(e) = grid_search(&d, &[1.0], &[1.0], 0.25, &cfg, seed, 1) {
            assert!(matches!(e, Error::InvalidSplit(_)));
            saw_error = true;
        }
    }
    assert!(saw_error);
}

#[test]
fn model_files_round_trip() {
    let d = thirty_points();
    let (model, _) = train(&d, 1.0, gaussian(0.7), &default_config(30)).unwrap();
    let dir = std::env::temp_dir().join(format!("racml-svm-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("m.json");
    save_model(&model, &path).unwrap();
    assert!(dir.join("m.sv.f64").exists());
    assert_eq!(load_model(&path).unwrap(), model);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn training_is_seed_deterministic() {
    let d = thirty_points();
    let cfg = SolverConfig { seed: 77, ..tight_config(30, 7, 77) };
    let a = train(&d, 1.0, gaussian(1.0), &cfg).unwrap();
    let b = train(&d, 1.0, gaussian(1.0), &cfg).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1.x, b.1.x);
}

#[test]
fn default_parameters() {
    assert_eq!(default_block_size(50), 50);
    assert_eq!(default_block_size(29_999), 100);
    assert_eq!(default_block_size(30_000), 500);
    assert_eq!(default_block_size(100_000), 1000);
    assert!((default_penalty(250, 100) - 0.3).abs() < 1e-15);
    let cfg = default_config(1000);
    assert_eq!((cfg.max_iters, cfg.tol_primal, cfg.tol_dual), (10, 0.1, 1.0));
}
