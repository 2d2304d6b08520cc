use super::*;
use crate::linalg::DenseMatrix;
use nalgebra::DVector;
use rand::Rng;

fn dense(rows: &[Vec<f64>]) -> Matrix {
    DenseMatrix::from_rows(rows).unwrap().into()
}

fn tiny() -> QpProblem {
    QpProblem::new(Some(dense(&[vec![1.0, 0.0], vec![0.0, 1.0]])), vec![0.0, 0.0])
        .with_constraints(dense(&[vec![1.0, 1.0]]), vec![2.0])
}

fn config(mode: Mode, s: usize) -> SolverConfig {
    SolverConfig {
        mode,
        block_size: s,
        beta_penalty: 1.0,
        max_iters: 5000,
        tol_primal: 1e-10,
        tol_dual: 1e-10,
        seed: 3,
        fixed_iterations: false,
    }
}

/// Random QP with SPD `H` and a full-row-rank `A`.
fn random_problem(seed: u64, n: usize, m: usize) -> QpProblem {
    let mut rng = rng_from_seed(seed);
    let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let h = &b * b.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5;
    let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let rhs: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    QpProblem::new(Some(DenseMatrix::from_nalgebra(&h).unwrap().into()), c)
        .with_constraints(DenseMatrix::from_nalgebra(&a).unwrap().into(), rhs)
}

/// Solves [[H, Aᵀ], [A, 0]] (x, −y) = (−c, b) with LU.
fn kkt_oracle(p: &QpProblem) -> (Vec<f64>, Vec<f64>) {
    let (n, m) = (p.n(), p.m());
    let h = p.h.as_ref().map_or(DMatrix::zeros(n, n), Matrix::to_nalgebra);
    let a = p.a.as_ref().map_or(DMatrix::zeros(m, n), Matrix::to_nalgebra);
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(&h);
    k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(&a);
    let mut rhs = DVector::zeros(n + m);
    for i in 0..n {
        rhs[i] = -p.c[i];
    }
    for i in 0..m {
        rhs[n + i] = p.b[i];
    }
    let sol = k.lu().solve(&rhs).unwrap();
    let x = sol.rows(0, n).iter().copied().collect();
    let y = sol.rows(n, m).iter().map(|v| -v).collect();
    (x, y)
}

/// Augmented Lagrangian evaluated directly from the definition.
fn lagrangian(p: &QpProblem, x: &[f64], y: &[f64], beta: f64) -> f64 {
    let n = p.n();
    let mut hx = vec![0.0; n];
    if let Some(h) = &p.h {
        h.mul_vec(x, &mut hx);
    }
    let mut r = vec![0.0; p.m()];
    if let Some(a) = &p.a {
        a.mul_vec(x, &mut r);
    }
    for (ri, bi) in r.iter_mut().zip(&p.b) {
        *ri -= bi;
    }
    0.5 * dot(x, &hx) + dot(&p.c, x) - dot(y, &r) + 0.5 * beta * dot(&r, &r)
}

#[test]
fn assemble_hand_example() {
    let sys = assemble_block_system(&tiny(), &[0.0, 0.0], &[0.0], &[0], 1.0).unwrap();
    assert_eq!(sys.matrix, DMatrix::from_element(1, 1, 2.0));
    assert_eq!(sys.rhs, vec![2.0]);
}

#[test]
fn assemble_all_zero_data() {
    let p = QpProblem::new(None, vec![0.0, 0.0])
        .with_constraints(dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]), vec![0.0, 0.0]);
    let sys = assemble_block_system(&p, &[0.0, 0.0], &[0.0, 0.0], &[0], 1.0).unwrap();
    assert_eq!(sys.matrix, DMatrix::from_element(1, 1, 1.0));
    assert_eq!(sys.rhs, vec![0.0]);
}

#[test]
fn assemble_rejects_bad_dimensions() {
    assert!(assemble_block_system(&tiny(), &[0.0], &[0.0], &[0], 1.0).is_err());
    assert!(assemble_block_system(&tiny(), &[0.0, 0.0], &[0.0], &[5], 1.0).is_err());
}

#[test]
fn block_rhs_is_negative_gradient_by_finite_differences() {
    let beta = 0.7;
    for seed in 0..10 {
        let p = random_problem(seed, 6, 2);
        let mut rng = rng_from_seed(100 + seed);
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let block = [4, 1, 2];
        let sys = assemble_block_system(&p, &x, &y, &block, beta).unwrap();

        // rhs is −∇_b L_A with the block's own variables at zero.
        let mut x0 = x.clone();
        for &i in &block {
            x0[i] = 0.0;
        }
        let h = 1e-5;
        for (k, &i) in block.iter().enumerate() {
            let (mut xp, mut xm) = (x0.clone(), x0.clone());
            xp[i] += h;
            xm[i] -= h;
            let fd = (lagrangian(&p, &xp, &y, beta) - lagrangian(&p, &xm, &y, beta)) / (2.0 * h);
            assert!((sys.rhs[k] + fd).abs() < 1e-8, "{} vs {}", sys.rhs[k], -fd);
        }

        // matrix · x_b − rhs is the gradient at the current x.
        for (k, &i) in block.iter().enumerate() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let fd = (lagrangian(&p, &xp, &y, beta) - lagrangian(&p, &xm, &y, beta)) / (2.0 * h);
            let mx: f64 = (0..3).map(|q| sys.matrix[(k, q)] * x[block[q]]).sum();
            assert!((mx - sys.rhs[k] - fd).abs() < 1e-8);
        }
    }
}

#[test]
fn dual_update_examples() {
    let a = dense(&[vec![1.0, 1.0]]);
    assert_eq!(dual_update(&[0.0], &a, &[0.0, 0.0], &[2.0], 1.0).unwrap(), vec![2.0]);
    assert_eq!(dual_update(&[0.5], &a, &[1.0, 1.0], &[2.0], 1.0).unwrap(), vec![0.5]);
    let full = dual_update(&[0.3], &a, &[0.1, 0.4], &[2.0], 1.0).unwrap()[0] - 0.3;
    let half = dual_update(&[0.3], &a, &[0.1, 0.4], &[2.0], 0.5).unwrap()[0] - 0.3;
    assert!((half - 0.5 * full).abs() < 1e-15);
    assert!(dual_update(&[0.0], &a, &[0.0], &[2.0], 1.0).is_err());
}

#[test]
fn residuals_at_kkt_and_infeasible_points() {
    let p = tiny();
    let r = compute_residuals(&p, &[1.0, 1.0], &[1.0, 1.0], &[1.0], 1.0);
    assert_eq!((r.primal, r.dual), (0.0, 0.0));
    let r = compute_residuals(&p, &[1.3, 1.0], &[1.3, 1.0], &[1.0], 1.0);
    assert!((r.primal - 0.3).abs() < 1e-15);
    assert!((r.primal_l1 - 0.3).abs() < 1e-15);
}

/// Box KKT conditions checked coordinate by coordinate.
fn kkt_holds(p: &QpProblem, x: &[f64], y: &[f64], tol: f64) -> bool {
    let n = p.n();
    let mut g = p.c.clone();
    if let Some(h) = &p.h {
        for i in 0..n {
            for j in 0..n {
                g[i] += h.get(i, j) * x[j];
            }
        }
    }
    if let Some(a) = &p.a {
        for j in 0..n {
            for i in 0..p.m() {
                g[j] -= a.get(i, j) * y[i];
            }
        }
    }
    (0..n).all(|j| {
        if x[j] <= p.lower[j] {
            g[j] >= -tol
        } else if x[j] >= p.upper[j] {
            g[j] <= tol
        } else {
            g[j].abs() <= tol
        }
    })
}

#[test]
fn dual_residual_vanishes_exactly_at_box_kkt_points() {
    let mut rng = rng_from_seed(11);
    for trial in 0..200 {
        let n = 4;
        let p0 = random_problem(trial, n, 1);
        // Build y and c so that a chosen x is (or is not) a KKT point.
        let x: Vec<f64> = (0..n).map(|i| [0.0, 1.0, 0.5, 0.25][i]).collect();
        let y = vec![rng.gen_range(-1.0..1.0)];
        let h = p0.h.as_ref().unwrap();
        let a = p0.a.as_ref().unwrap();
        let mut c = vec![0.0; n];
        for j in 0..n {
            let hxj: f64 = (0..n).map(|k| h.get(j, k) * x[k]).sum();
            c[j] = -hxj + a.get(0, j) * y[0];
        }
        // x0 at lower bound, x1 at upper bound: push their gradients outward.
        let perturb = rng.gen_range(0.001..0.5) * if trial % 2 == 0 { 1.0 } else { -1.0 };
        c[0] += perturb;
        c[1] -= perturb;
        let p = QpProblem {
            c,
            lower: vec![0.0; n],
            upper: vec![1.0; n],
            ..p0
        };
        let r = compute_residuals(&p, &x, &x, &y, 1.0);
        let is_kkt = kkt_holds(&p, &x, &y, 1e-12);
        assert_eq!(is_kkt, perturb > 0.0);
        assert_eq!(r.dual <= 1e-12, is_kkt, "trial {trial}: {r:?}");
        if !is_kkt {
            assert!(r.dual >= perturb.abs() - 1e-12);
        }
    }
}

#[test]
fn tiny_problem_converges_in_every_mode() {
    for mode in [Mode::Rac, Mode::Rp, Mode::Cyclic] {
        let res = solve(&tiny(), &config(mode, 1)).unwrap();
        assert_eq!(res.status, Status::Converged, "{mode:?}");
        assert!((res.x[0] - 1.0).abs() < 1e-9 && (res.x[1] - 1.0).abs() < 1e-9);
        assert!((res.y[0] - 1.0).abs() < 1e-9);
        assert_eq!(res.primal_residual_history.len(), res.iterations);
        assert_eq!(res.dual_residual_history.len(), res.iterations);
        assert!(res.final_primal() <= 1e-10 && res.final_dual() <= 1e-10);
    }
}

#[test]
fn rac_matches_direct_kkt_solve() {
    for seed in 0..5 {
        let p = random_problem(seed, 6, 2);
        let (xs, ys) = kkt_oracle(&p);
        let mut cfg = config(Mode::Rac, 2);
        cfg.tol_primal = 1e-12;
        cfg.tol_dual = 1e-12;
        cfg.max_iters = 20000;
        let res = solve(&p, &cfg).unwrap();
        assert_eq!(res.status, Status::Converged);
        for (a, b) in res.x.iter().zip(&xs) {
            assert!((a - b).abs() < 1e-6, "seed {seed}: {:?} vs {xs:?}", res.x);
        }
        for (a, b) in res.y.iter().zip(&ys) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn block_steps_never_increase_lagrangian_and_respect_box() {
    for seed in 0..5 {
        let mut p = random_problem(seed, 7, 2);
        p.lower = vec![-0.2; 7];
        p.upper = vec![0.3; 7];
        let beta = 1.5;
        let mut engine = Engine::for_problem(&p, beta).unwrap();
        let mut rng = rng_from_seed(seed);
        for _ in 0..30 {
            let part = partition_with(7, 3, Some(&mut rng)).unwrap();
            for g in part.groups() {
                let before = lagrangian(&p, engine.x(), engine.y(), beta);
                engine.minimize_block(g).unwrap();
                let after = lagrangian(&p, engine.x(), engine.y(), beta);
                assert!(after <= before + 1e-10, "{after} > {before}");
                assert!((engine.augmented_lagrangian() - after).abs() < 1e-9);
                for (i, v) in engine.x().iter().enumerate() {
                    assert!(*v >= p.lower[i] && *v <= p.upper[i]);
                }
            }
            engine.dual_step();
        }
    }
}

#[test]
fn bounded_solve_reaches_box_kkt_point() {
    let mut p = random_problem(9, 8, 2);
    p.lower = vec![-0.1; 8];
    p.upper = vec![0.2; 8];
    // keep the equality feasible inside the box
    let a = p.a.as_ref().unwrap();
    let mut ax = vec![0.0; 2];
    a.mul_vec(&[0.05; 8], &mut ax);
    p.b = ax;
    for mode in [Mode::Rac, Mode::Rp, Mode::Cyclic] {
        let mut cfg = config(mode, 3);
        cfg.tol_primal = 1e-9;
        cfg.tol_dual = 1e-9;
        cfg.max_iters = 50_000;
        let res = solve(&p, &cfg).unwrap();
        assert_eq!(res.status, Status::Converged, "{mode:?}");
        assert!(kkt_holds(&p, &res.x, &res.y, 1e-8));
    }
}

#[test]
fn seeded_solves_are_bit_identical() {
    let p = random_problem(4, 6, 2);
    for mode in [Mode::Rac, Mode::Rp, Mode::Cyclic] {
        let mut cfg = config(mode, 2);
        cfg.max_iters = 50;
        cfg.fixed_iterations = true;
        let a = solve(&p, &cfg).unwrap();
        let b = solve(&p, &cfg).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(a.primal_residual_history, b.primal_residual_history);
        assert_eq!(a.iterations, 50);
    }
}

#[test]
fn fixed_iterations_ignores_tolerances() {
    let mut cfg = config(Mode::Cyclic, 1);
    cfg.max_iters = 40;
    cfg.fixed_iterations = true;
    cfg.tol_primal = 1.0;
    cfg.tol_dual = 1.0;
    let res = solve(&tiny(), &cfg).unwrap();
    assert_eq!(res.iterations, 40);
}

#[test]
fn cyclic_three_block_counterexample_diverges() {
    // Classic example on which direct multi-block cyclic ADMM diverges.
    let a = dense(&[vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 2.0], vec![1.0, 2.0, 2.0]]);
    let p = QpProblem::new(None, vec![0.0; 3])
        .with_constraints(a, vec![0.0; 3])
        .with_bounds(vec![f64::NEG_INFINITY; 3], vec![f64::INFINITY; 3]);
    let mut engine = Engine::for_problem(&p, 1.0).unwrap();
    engine.set_state(&[1.0, 1.0, 1.0], &[0.0; 3]).unwrap();
    let order = UpdateOrder::new(3, vec![vec![0], vec![1], vec![2]]).unwrap();
    let mut norms = Vec::new();
    for _ in 0..400 {
        engine.sweep(&order).unwrap();
        norms.push(crate::linalg::norm_inf(engine.x()));
    }
    assert!(norms[399] > 10.0 * norms[10]);

    // Through `solve`, starting at zero keeps the iterate at the solution;
    // shift b so the start is infeasible and check the guard fires.
    let p = QpProblem { b: vec![1.0, 0.0, 0.0], ..p };
    let mut cfg = config(Mode::Cyclic, 1);
    cfg.max_iters = 100_000;
    let res = solve(&p, &cfg).unwrap();
    assert_eq!(res.status, Status::Diverged);
}

#[test]
fn singular_block_reports_assumption_violation() {
    let p = QpProblem::new(None, vec![1.0, 1.0])
        .with_constraints(dense(&[vec![1.0, 0.0]]), vec![1.0]);
    let err = solve(&p, &config(Mode::Cyclic, 1)).unwrap_err();
    assert!(matches!(err, crate::error::Error::AssumptionViolation(_)));
}

#[test]
fn invalid_config_is_rejected() {
    let mut cfg = config(Mode::Rac, 3);
    assert!(solve(&tiny(), &cfg).is_err());
    cfg.block_size = 1;
    cfg.beta_penalty = 0.0;
    assert!(solve(&tiny(), &cfg).is_err());
}
