//! Linear-system view of RAC-ADMM on small unbounded instances.
//!
//! With `z = (x; y)` one sweep under update order `σ` is the affine map
//! `z ← M_σ z + L̄_σ⁻¹ b̄`, where
//!
//! ```text
//!     (L_σ)_{σi,σj} = H_{σi,σj} + β A_σiᵀ A_σj   for i ≥ j, else 0
//!     R_σ = L_σ − (H + βAᵀA)
//!     L̄_σ = [[L_σ, 0], [βA, I]]     R̄_σ = [[R_σ, Aᵀ], [0, I]]
//!     b̄   = (−c + βAᵀb; βb)          M_σ = L̄_σ⁻¹ R̄_σ
//! ```
//!
//! Averaging over every order (exhaustive enumeration, so `n ≤ 10`) gives
//! `Q = E[L_σ⁻¹]`, the expected map `M`, and `E[M_σ ⊗ M_σ]`, whose spectra
//! certify convergence in expectation and almost surely.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dims, invalid, Error, Result};
use crate::partition::{enumerate_orders, enumerate_partitions, orders_of, UpdateOrder};
use crate::problem::QpProblem;

/// Imaginary parts at or below this are treated as rounding noise.
pub const IMAG_TOL: f64 = 1e-9;
/// Upper end of the admissible spectrum of `QS`.
pub const QS_BOUND: f64 = 4.0 / 3.0;
/// Largest `n + m` for the `(n+m)² × (n+m)²` Kronecker eigenproblem.
pub const MAX_KRON_DIM: usize = 10;

fn check_shapes(h: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<usize> {
    let n = h.nrows();
    if h.ncols() != n || a.ncols() != n {
        return Err(dims(format!(
            "H is {}x{}, A is {}x{}",
            h.nrows(),
            h.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(n)
}

/// `S = H + βAᵀA`
pub fn s_matrix(h: &DMatrix<f64>, a: &DMatrix<f64>, beta: f64) -> DMatrix<f64> {
    h + a.transpose() * a * beta
}

/// Block lower-triangular part of `S` with respect to `order`.
pub fn build_l_sigma(
    h: &DMatrix<f64>,
    a: &DMatrix<f64>,
    beta: f64,
    order: &UpdateOrder,
) -> Result<DMatrix<f64>> {
    let n = check_shapes(h, a)?;
    if order.dim() != n {
        return Err(dims(format!("order covers {} indices, expected {n}", order.dim())));
    }
    let s = s_matrix(h, a, beta);
    let mut l = DMatrix::zeros(n, n);
    let groups = order.groups();
    for (i, gi) in groups.iter().enumerate() {
        for gj in &groups[..=i] {
            for &r in gi {
                for &c in gj {
                    l[(r, c)] = s[(r, c)];
                }
            }
        }
    }
    Ok(l)
}

/// The matrices of one update order's sweep map.
#[derive(Debug, Clone)]
pub struct MappingBundle {
    pub l_sigma: DMatrix<f64>,
    pub r_sigma: DMatrix<f64>,
    pub l_bar: DMatrix<f64>,
    pub r_bar: DMatrix<f64>,
    pub m_sigma: DMatrix<f64>,
}

impl MappingBundle {
    /// `L̄_σ⁻¹ b̄`, the affine part of the sweep map.
    pub fn affine_term(&self, a: &DMatrix<f64>, c: &[f64], b: &[f64], beta: f64) -> Result<DVector<f64>> {
        let bar = b_bar(a, c, b, beta)?;
        self.l_bar
            .clone()
            .lu()
            .solve(&bar)
            .ok_or_else(|| Error::AssumptionViolation("L̄_σ is singular".into()))
    }

    /// `M_σ z + L̄_σ⁻¹ b̄`
    pub fn apply(&self, z: &DVector<f64>, affine: &DVector<f64>) -> DVector<f64> {
        &self.m_sigma * z + affine
    }
}

/// `b̄ = (−c + βAᵀb; βb)`
pub fn b_bar(a: &DMatrix<f64>, c: &[f64], b: &[f64], beta: f64) -> Result<DVector<f64>> {
    let (m, n) = a.shape();
    if c.len() != n || b.len() != m {
        return Err(dims("c or b disagrees with A"));
    }
    let bv = DVector::from_column_slice(b);
    let top = -DVector::from_column_slice(c) + a.transpose() * &bv * beta;
    let mut out = DVector::zeros(n + m);
    out.rows_mut(0, n).copy_from(&top);
    out.rows_mut(n, m).copy_from(&(bv * beta));
    Ok(out)
}

pub fn mapping_matrix(
    h: &DMatrix<f64>,
    a: &DMatrix<f64>,
    beta: f64,
    order: &UpdateOrder,
) -> Result<MappingBundle> {
    let l_sigma = build_l_sigma(h, a, beta, order)?;
    let (m, n) = a.shape();
    let r_sigma = &l_sigma - s_matrix(h, a, beta);

    let mut l_bar = DMatrix::zeros(n + m, n + m);
    l_bar.view_mut((0, 0), (n, n)).copy_from(&l_sigma);
    l_bar.view_mut((n, 0), (m, n)).copy_from(&(a * beta));
    l_bar.view_mut((n, n), (m, m)).fill_with_identity();

    let mut r_bar = DMatrix::zeros(n + m, n + m);
    r_bar.view_mut((0, 0), (n, n)).copy_from(&r_sigma);
    r_bar.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    r_bar.view_mut((n, n), (m, m)).fill_with_identity();

    let m_sigma = l_bar
        .clone()
        .lu()
        .solve(&r_bar)
        .filter(|_| l_sigma.clone().lu().is_invertible())
        .ok_or_else(|| {
            Error::AssumptionViolation("L_σ is singular for this update order".into())
        })?;
    Ok(MappingBundle {
        l_sigma,
        r_sigma,
        l_bar,
        r_bar,
        m_sigma,
    })
}

/// `Q = E_σ[L_σ⁻¹]`, `S`, the expected map `M` from its block formula, and
/// the direct average of the `M_σ` for comparison.
#[derive(Debug, Clone)]
pub struct ExpectedOperators {
    pub q: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub m_average: DMatrix<f64>,
    pub orders: usize,
}

impl ExpectedOperators {
    /// `max |M − E[M_σ]|`
    pub fn formula_gap(&self) -> f64 {
        (&self.m - &self.m_average).amax()
    }
}

fn invert(l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    l.clone()
        .try_inverse()
        .ok_or_else(|| Error::AssumptionViolation("L_σ is singular for this update order".into()))
}

/// Expected block formula
/// `M = [[I − QS, QAᵀ], [−βA + βAQS, I − βAQAᵀ]]`.
pub fn expected_map(q: &DMatrix<f64>, s: &DMatrix<f64>, a: &DMatrix<f64>, beta: f64) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let qs = q * s;
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n))
        .copy_from(&(DMatrix::identity(n, n) - &qs));
    out.view_mut((0, n), (n, m)).copy_from(&(q * a.transpose()));
    out.view_mut((n, 0), (m, n))
        .copy_from(&((a * &qs - a) * beta));
    out.view_mut((n, n), (m, m))
        .copy_from(&(DMatrix::identity(m, m) - a * q * a.transpose() * beta));
    out
}

pub fn expected_operators(
    h: &DMatrix<f64>,
    a: &DMatrix<f64>,
    beta: f64,
    p: usize,
) -> Result<ExpectedOperators> {
    let n = check_shapes(h, a)?;
    let m = a.nrows();
    let orders = enumerate_orders(n, p)?;
    let mut q = DMatrix::zeros(n, n);
    let mut m_average = DMatrix::zeros(n + m, n + m);
    for order in &orders {
        let bundle = mapping_matrix(h, a, beta, order)?;
        q += invert(&bundle.l_sigma)?;
        m_average += &bundle.m_sigma;
    }
    let count = orders.len() as f64;
    q /= count;
    m_average /= count;
    let s = s_matrix(h, a, beta);
    let m_formula = expected_map(&q, &s, a, beta);
    Ok(ExpectedOperators {
        q,
        s,
        m: m_formula,
        m_average,
        orders: orders.len(),
    })
}

/// `E[M_σ ⊗ M_σ]` by exhaustive enumeration.
pub fn expected_kron(h: &DMatrix<f64>, a: &DMatrix<f64>, beta: f64, p: usize) -> Result<DMatrix<f64>> {
    let n = check_shapes(h, a)?;
    let d = n + a.nrows();
    if d > MAX_KRON_DIM {
        return Err(Error::Capacity(format!(
            "Kronecker check needs n + m <= {MAX_KRON_DIM}, got {d}"
        )));
    }
    let orders = enumerate_orders(n, p)?;
    let mut acc = DMatrix::zeros(d * d, d * d);
    for order in &orders {
        let ms = mapping_matrix(h, a, beta, order)?.m_sigma;
        acc += ms.kronecker(&ms);
    }
    Ok(acc / orders.len() as f64)
}

fn complex_spectrum(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap()
            .then(x.im.partial_cmp(&y.im).unwrap())
    });
    ev
}

/// Eigenvalues of `Q S`. When `S ≻ 0` and `Q` is symmetric they are read
/// off the symmetric similar matrix `S^{1/2} Q S^{1/2}`; otherwise a general
/// eigensolve is used.
pub fn qs_spectrum(q: &DMatrix<f64>, s: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let q_sym = (q - q.transpose()).amax() <= 1e-12 * q.amax().max(1.0);
    if q_sym {
        if let Some(root) = spd_sqrt(s) {
            let t = &root * q * &root;
            let t = (&t + t.transpose()) * 0.5;
            let mut ev: Vec<Complex<f64>> = t
                .symmetric_eigenvalues()
                .iter()
                .map(|v| Complex::new(*v, 0.0))
                .collect();
            ev.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
            return ev;
        }
    }
    complex_spectrum(&(q * s))
}

/// Principal square root of a symmetric positive-definite matrix.
fn spd_sqrt(s: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    s.clone().cholesky()?;
    let eig = s.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| *v <= 0.0) {
        return None;
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Some(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .fold(0.0, |r: f64, v| r.max(v.norm()))
}

/// `Q_υ S` for one partition, `Q_υ` averaging `L_σ⁻¹` over its `p!` orders.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionReport {
    pub groups: Vec<Vec<usize>>,
    /// Largest real part of `eig(Q_υ S)`.
    pub max_eig: f64,
    /// Smallest real part of `eig(Q_υ S)`.
    pub min_eig: f64,
    /// Largest `|imag|` in `eig(Q_υ S)`.
    pub max_imag: f64,
    /// `‖Q_υS − (Q_υS)ᵀ‖_∞` (Euclidean symmetry).
    pub asymmetry: f64,
    /// `‖S Q_υ S − (S Q_υ S)ᵀ‖_∞` relative to `‖S Q_υ S‖_∞` (symmetry in
    /// the `S` inner product).
    pub s_asymmetry: f64,
}

/// Everything `certify` computes; booleans are recomputable from the
/// stored spectra.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceCertificate {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub beta: f64,
    #[serde(rename = "eig_QS")]
    pub eig_qs: Vec<[f64; 2]>,
    #[serde(rename = "eig_M")]
    pub eig_m: Vec<[f64; 2]>,
    /// `ρ(E[M_σ ⊗ M_σ])`, absent when the Kronecker check was not run.
    pub rho_kron: Option<f64>,
    pub assumption1_ok: bool,
    pub lemma2_ok: bool,
    /// `rho_kron < 1`; absent when the Kronecker check was not run.
    pub as_ok: Option<bool>,
    /// Every eigenvalue of `M` has modulus below one, or equals one.
    pub eig_m_ok: bool,
    /// `max |M_formula − E[M_σ]|`
    pub m_formula_gap: f64,
    pub partitions: Vec<PartitionReport>,
    /// Mean over partitions of `λ₁(Q_υ S)`.
    pub weyl_bound: f64,
    pub weyl_ok: bool,
    /// Every `Q_υ S` has spectrum in `(0, 4/3)` and is `S`-self-adjoint.
    pub prop1_spectrum_ok: bool,
    /// Every `Q_υ S` is Euclidean-symmetric within `1e-9`.
    pub prop1_symmetric_ok: bool,
}

impl ConvergenceCertificate {
    /// Recomputes `lemma2_ok` from `eig_QS`.
    pub fn lemma2_from_spectrum(&self) -> bool {
        lemma2_holds(&self.eig_qs)
    }
}

fn lemma2_holds(eig: &[[f64; 2]]) -> bool {
    !eig.is_empty()
        && eig
            .iter()
            .all(|[re, im]| *re >= -IMAG_TOL && *re < QS_BOUND - 1e-9 && im.abs() <= IMAG_TOL)
}

fn pairs(ev: &[Complex<f64>]) -> Vec<[f64; 2]> {
    ev.iter().map(|c| [c.re, c.im]).collect()
}

/// `H_bb + βA_bᵀA_b ≻ 0` for every block `b` of size `s`, i.e. every
/// `s`-subset of the variables, since RAC can assemble any of them.
pub fn assumption1_holds(h: &DMatrix<f64>, a: &DMatrix<f64>, beta: f64, s: usize) -> bool {
    let n = h.nrows();
    let sm = s_matrix(h, a, beta);
    let mut subset: Vec<usize> = (0..s).collect();
    loop {
        let sub = DMatrix::from_fn(s, s, |i, j| sm[(subset[i], subset[j])]);
        if sub.cholesky().is_none() {
            return false;
        }
        // next s-subset in lexicographic order
        let mut k = s;
        loop {
            if k == 0 {
                return true;
            }
            k -= 1;
            if subset[k] < n - s + k {
                subset[k] += 1;
                for t in k + 1..s {
                    subset[t] = subset[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Builds the convergence certificate for `(H, A, β)` with `p` blocks.
///
/// With `kron` the almost-sure check `ρ(E[M_σ ⊗ M_σ]) < 1` is included.
pub fn certify(
    h: &DMatrix<f64>,
    a: &DMatrix<f64>,
    beta: f64,
    p: usize,
    kron: bool,
) -> Result<ConvergenceCertificate> {
    let n = check_shapes(h, a)?;
    let m = a.nrows();
    if !(beta > 0.0) {
        return Err(invalid("penalty must be positive"));
    }
    // validates p | n and the size cap up front
    enumerate_partitions(n, p)?;
    let s = n / p;
    let assumption1_ok = assumption1_holds(h, a, beta, s);

    let mut cert = ConvergenceCertificate {
        n,
        m,
        p,
        beta,
        eig_qs: Vec::new(),
        eig_m: Vec::new(),
        rho_kron: None,
        assumption1_ok,
        lemma2_ok: false,
        as_ok: None,
        eig_m_ok: false,
        m_formula_gap: f64::NAN,
        partitions: Vec::new(),
        weyl_bound: f64::NAN,
        weyl_ok: false,
        prop1_spectrum_ok: false,
        prop1_symmetric_ok: false,
    };

    let ops = match expected_operators(h, a, beta, p) {
        Ok(ops) => ops,
        // Some L_σ is singular: nothing downstream is defined.
        Err(Error::AssumptionViolation(_)) if !assumption1_ok => return Ok(cert),
        Err(e) => return Err(e),
    };
    let qs_eig = qs_spectrum(&ops.q, &ops.s);
    cert.eig_qs = pairs(&qs_eig);
    cert.lemma2_ok = lemma2_holds(&cert.eig_qs);
    let m_eig = complex_spectrum(&ops.m);
    cert.eig_m = pairs(&m_eig);
    cert.eig_m_ok = m_eig.iter().all(|l| {
        let near_one = (l.re - 1.0).abs() <= 1e-9 && l.im.abs() <= IMAG_TOL;
        l.norm() < 1.0 + 1e-9 && (l.norm() < 1.0 - 1e-9 || near_one)
    });
    cert.m_formula_gap = ops.formula_gap();

    let mut lambda1_sum = 0.0;
    let mut spectrum_ok = true;
    let mut symmetric_ok = true;
    for part in enumerate_partitions(n, p)? {
        let mut q_part = DMatrix::zeros(n, n);
        let orders = orders_of(&part);
        for order in &orders {
            q_part += invert(&build_l_sigma(h, a, beta, order)?)?;
        }
        q_part /= orders.len() as f64;
        let ev = qs_spectrum(&q_part, &ops.s);
        let qs = &q_part * &ops.s;
        let sqs = &ops.s * &qs;
        let report = PartitionReport {
            groups: part.groups().to_vec(),
            max_eig: ev.iter().fold(f64::NEG_INFINITY, |x, v| x.max(v.re)),
            min_eig: ev.iter().fold(f64::INFINITY, |x, v| x.min(v.re)),
            max_imag: ev.iter().fold(0.0, |x: f64, v| x.max(v.im.abs())),
            asymmetry: (&qs - qs.transpose()).amax(),
            s_asymmetry: (&sqs - sqs.transpose()).amax() / sqs.amax().max(f64::MIN_POSITIVE),
        };
        lambda1_sum += report.max_eig;
        spectrum_ok &= report.min_eig > -IMAG_TOL
            && report.max_eig < QS_BOUND
            && report.max_imag <= IMAG_TOL
            && report.s_asymmetry <= 1e-9;
        symmetric_ok &= report.asymmetry <= 1e-9;
        cert.partitions.push(report);
    }
    cert.weyl_bound = lambda1_sum / cert.partitions.len() as f64;
    let lambda1 = qs_eig.iter().fold(f64::NEG_INFINITY, |x, v| x.max(v.re));
    cert.weyl_ok = lambda1 <= cert.weyl_bound + 1e-9;
    cert.prop1_spectrum_ok = spectrum_ok;
    cert.prop1_symmetric_ok = symmetric_ok;

    if kron {
        let rho = spectral_radius(&expected_kron(h, a, beta, p)?);
        cert.rho_kron = Some(rho);
        cert.as_ok = Some(rho < 1.0);
    }
    Ok(cert)
}

/// Dense `H` and `A` of a problem (zero matrices when absent).
pub fn dense_parts(problem: &QpProblem) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (problem.n(), problem.m());
    let h = problem
        .h
        .as_ref()
        .map_or_else(|| DMatrix::zeros(n, n), |h| h.to_nalgebra());
    let a = problem
        .a
        .as_ref()
        .map_or_else(|| DMatrix::zeros(m, n), |a| a.to_nalgebra());
    (h, a)
}

/// `max(‖Ax − b‖_∞, ‖Π(x − (Hx + c − Aᵀy)) − x‖_∞)`, zero exactly at KKT
/// pairs. Evaluated with dense products, independently of the engine.
pub fn kkt_residual(problem: &QpProblem, x: &[f64], y: &[f64]) -> Result<f64> {
    let (n, m) = (problem.n(), problem.m());
    if x.len() != n || y.len() != m {
        return Err(dims("x or y has the wrong length"));
    }
    let (h, a) = dense_parts(problem);
    let xv = DVector::from_column_slice(x);
    let yv = DVector::from_column_slice(y);
    let feas = &a * &xv - DVector::from_column_slice(&problem.b);
    let grad = &h * &xv + DVector::from_column_slice(&problem.c) - a.transpose() * &yv;
    let stat = (0..n)
        .map(|j| ((x[j] - grad[j]).clamp(problem.lower[j], problem.upper[j]) - x[j]).abs())
        .fold(0.0, f64::max);
    Ok(feas.amax().max(stat))
}
