//! Dense reference computations and theory-facing measurements.
//!
//! Everything here is test tooling: dense 3N/2N matrices, direct LU solves,
//! numerical checks of the frame identities, the energy norm by two
//! independent code paths, the convergence factors of the preconditioner
//! analysis, and checks of two auxiliary matrix inequalities.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{AssembledSystem, FemSpace, ScalarMatrix};
use crate::gmres::LinearOperator;
use crate::precond::inner_matrix;
use crate::sparse::CsrMatrix;
use crate::tangent::{householder_frame, TangentFrame};
use crate::vec3::{self, Mat3, Vec3};

/// Largest node count accepted by the dense oracles.
pub const DENSE_NODE_LIMIT: usize = 200;

/// Outcome of one numerical check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub check: String,
    pub max_error: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Report {
    pub fn new(check: impl Into<String>, max_error: f64, threshold: f64) -> Self {
        Report { check: check.into(), max_error, threshold, pass: max_error <= threshold }
    }
}

pub fn csr_to_dense(a: &CsrMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            d[(i, j)] = v;
        }
    }
    d
}

/// Dense `Q[m]` (3N×2N).
pub fn frame_to_dense(frame: &TangentFrame) -> DMatrix<f64> {
    let n = frame.num_nodes();
    let mut q = DMatrix::zeros(3 * n, 2 * n);
    for i in 0..n {
        let b = frame.block(i);
        for c in 0..2 {
            for r in 0..3 {
                q[(3 * i + r, 2 * i + c)] = b[c][r];
            }
        }
    }
    q
}

/// Matrix of a linear operator, column by column from unit vectors.
pub fn operator_to_dense<A: LinearOperator + ?Sized>(op: &A) -> DMatrix<f64> {
    let n = op.dim();
    let mut d = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut y = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply_into(&e, &mut y);
        e[j] = 0.0;
        for i in 0..n {
            d[(i, j)] = y[i];
        }
    }
    d
}

/// Dense form of `A_k`, `Q`, `b` and the reduced system.
#[derive(Clone, Debug)]
pub struct DenseSystem {
    pub a: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub b3: DVector<f64>,
    pub b: DVector<f64>,
    pub reduced: DMatrix<f64>,
}

impl DenseSystem {
    pub fn new(system: &AssembledSystem, frame: &TangentFrame) -> Result<Self> {
        let n = system.n();
        if n > DENSE_NODE_LIMIT {
            return Err(Error::InvalidParameter(format!("dense oracle limited to {DENSE_NODE_LIMIT} nodes, got {n}")));
        }
        let a = csr_to_dense(&system.to_csr());
        let q = frame_to_dense(frame);
        let b3 = DVector::from_column_slice(&system.rhs);
        let b = q.transpose() * &b3;
        let reduced = q.transpose() * &a * &q;
        Ok(DenseSystem { a, q, b3, b, reduced })
    }
}

#[derive(Clone, Debug)]
pub struct DenseSolution {
    pub x: Vec<f64>,
    /// Lifted `v = Q x` (3N, node-major).
    pub v: Vec<f64>,
    pub dense: DenseSystem,
}

/// Solves the reduced system by LU with partial pivoting.
pub fn dense_oracle_solve(system: &AssembledSystem, frame: &TangentFrame) -> Result<DenseSolution> {
    let dense = DenseSystem::new(system, frame)?;
    let x = dense
        .reduced
        .clone()
        .lu()
        .solve(&dense.b)
        .ok_or_else(|| Error::Singular("reduced tangent-space matrix".into()))?;
    let v = &dense.q * &x;
    Ok(DenseSolution { x: x.as_slice().to_vec(), v: v.as_slice().to_vec(), dense })
}

pub fn random_vector(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Uniformly distributed unit vector.
pub fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = vec3::norm(v);
        if n > 1e-3 && n <= 1.0 {
            return vec3::scale(1.0 / n, v);
        }
    }
}

pub fn random_unit_field(rng: &mut impl Rng, n: usize) -> Vec<Vec3> {
    (0..n).map(|_| random_unit(rng)).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// `QᵀQ = I`, `(QQᵀ)² = QQᵀ` and `QQᵀ m = 0`, each tested on random vectors.
pub fn check_mapping_identities(frame: &TangentFrame, m: &[Vec3], samples: usize, seed: u64) -> Vec<Report> {
    let n = frame.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut e_qtq, mut e_proj) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let x = random_vector(&mut rng, 2 * n);
        let qx = frame.apply_q(&x).unwrap();
        let back = frame.apply_qt(&qx).unwrap();
        e_qtq = e_qtq.max(max_abs(&back.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>()));

        let y = random_vector(&mut rng, 3 * n);
        let p1 = frame.apply_q(&frame.apply_qt(&y).unwrap()).unwrap();
        let p2 = frame.apply_q(&frame.apply_qt(&p1).unwrap()).unwrap();
        e_proj = e_proj.max(max_abs(&p2.iter().zip(&p1).map(|(a, b)| a - b).collect::<Vec<_>>()));
    }
    let mflat: Vec<f64> = m.iter().flat_map(|v| v.iter().copied()).collect();
    let e_kernel = max_abs(&frame.apply_q(&frame.apply_qt(&mflat).unwrap()).unwrap());
    vec![
        Report::new("QtQ = I", e_qtq, 1e-13),
        Report::new("(QQt)^2 = QQt", e_proj, 1e-13),
        Report::new("QQt m = 0", e_kernel, 1e-13),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyNorm {
    /// `(x · Qᵀ(α_P M + β(k)k L)Q x)^{1/2}`
    pub matrix_form: f64,
    /// `(α_P ‖Qx‖² + β(k)k ‖∇Qx‖²)^{1/2}` by element integration.
    pub fem_form: f64,
}

/// Energy norm of `x` by the matrix and by the finite element route.
pub fn energy_norm(
    space: &FemSpace,
    mass: &ScalarMatrix,
    stiffness: &ScalarMatrix,
    frame: &TangentFrame,
    alpha_p: f64,
    beta_k: f64,
    x: &[f64],
) -> EnergyNorm {
    let b = inner_matrix(mass, stiffness, alpha_p, beta_k);
    let v = frame.apply_q(x).unwrap();
    let bv = b.mul_blocked(3, &v);
    let qtbv = frame.apply_qt(&bv).unwrap();
    let matrix = x.iter().zip(&qtbv).map(|(a, b)| a * b).sum::<f64>();
    let lifted: Vec<Vec3> = v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let fem = alpha_p * space.l2_inner(&lifted, &lifted) + beta_k * space.h1_semi_inner(&lifted, &lifted);
    EnergyNorm { matrix_form: matrix.max(0.0).sqrt(), fem_form: fem.max(0.0).sqrt() }
}

/// Factors of the GMRES convergence analysis. The γ-variants are `None`
/// when `γ ≤ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoryFactors {
    pub gamma: f64,
    pub f_theoretical: f64,
    pub f_theoretical_gamma: Option<f64>,
    pub f_stationary_gamma: Option<f64>,
    pub f_practical: f64,
    pub f_practical_gamma: Option<f64>,
    pub kappa_tilde: f64,
    pub kappa: Option<f64>,
}

/// Spectral norm of a 3×2 matrix given by its columns.
fn norm_3x2(c: [Vec3; 2]) -> f64 {
    let a = vec3::dot(c[0], c[0]);
    let d = vec3::dot(c[1], c[1]);
    let b = vec3::dot(c[0], c[1]);
    let half_tr = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (half_tr + disc).max(0.0).sqrt()
}

/// `max_z |m(z) − μ(z)|`
pub fn max_nodal_difference(m: &[Vec3], mu: &[Vec3]) -> f64 {
    m.iter().zip(mu).map(|(&a, &b)| vec3::norm(vec3::sub(a, b))).fold(0.0, f64::max)
}

/// Evaluates all factors literally for the fields `m` (current) and `μ`
/// (preconditioner argument), Tₙ = `t`, mesh size `h`.
#[allow(clippy::too_many_arguments)]
pub fn theory_factors(space: &FemSpace, m: &[Vec3], mu: &[Vec3], t: &Mat3, h: f64, alpha_p: f64, beta_k: f64) -> Result<TheoryFactors> {
    let te3 = vec3::column(t, 2);
    let gamma = m.iter().chain(mu).map(|&v| 1.0 + vec3::dot(v, te3)).fold(f64::INFINITY, f64::min);
    let mut hdiff: f64 = 0.0;
    for (&a, &b) in m.iter().zip(mu) {
        let ha = householder_frame(vec3::mat_vec(t, a))?;
        let hb = householder_frame(vec3::mat_vec(t, b))?;
        let d = norm_3x2([vec3::sub(ha[0], hb[0]), vec3::sub(ha[1], hb[1])]);
        hdiff = hdiff.max(d);
    }
    let s = beta_k / alpha_p;
    let f_theoretical = 1.0 + s / (h * h) * hdiff * hdiff;
    let f_practical = 1.0 + s / (h * h);

    let diff = max_nodal_difference(m, mu);
    let gm = space.max_gradient_norm(m);
    let gmu = space.max_gradient_norm(mu);
    let dgrad: Vec<Vec3> = m.iter().zip(mu).map(|(&a, &b)| vec3::sub(a, b)).collect();
    let gdiff = space.max_gradient_norm(&dgrad);

    let gamma_terms = |g: f64| {
        1.0 + diff * diff / (g * g) + s / (g * g) * gdiff * gdiff + s / g.powi(6) * (gm * gm + gmu * gmu) * diff * diff
    };
    let (f_theoretical_gamma, f_stationary_gamma, f_practical_gamma) = if gamma > 0.0 {
        (
            Some(gamma_terms(gamma)),
            Some(1.0 + 1.0 / (gamma * gamma) + s / gamma.powi(6) * gm * gm),
            Some(1.0 + s / gamma.powi(4) * gm * gm),
        )
    } else {
        (None, None, None)
    };
    Ok(TheoryFactors {
        gamma,
        f_theoretical,
        f_theoretical_gamma,
        f_stationary_gamma,
        f_practical,
        f_practical_gamma,
        kappa_tilde: f_theoretical.sqrt(),
        kappa: f_theoretical_gamma.map(f64::sqrt),
    })
}

/// `max |μᵢμⱼ/(1+μ₃)|`, `i,j ∈ {1,2}`, over a barycentric lattice with
/// `level` subdivisions in every element.
pub fn bounded_ratio_max(space: &FemSpace, mu: &[Vec3], level: usize) -> f64 {
    let mut pts = Vec::new();
    for a in 0..=level {
        for b in 0..=level - a {
            for c in 0..=level - a - b {
                let d = level - a - b - c;
                pts.push([a, b, c, d].map(|v| v as f64 / level as f64));
            }
        }
    }
    let mut worst: f64 = 0.0;
    for t in space.mesh().tets() {
        for l in &pts {
            let mut v = [0.0; 3];
            for p in 0..4 {
                v = vec3::axpy(v, l[p], mu[t[p]]);
            }
            let denom = 1.0 + v[2];
            for i in 0..2 {
                for j in 0..2 {
                    worst = worst.max((v[i] * v[j] / denom).abs());
                }
            }
        }
    }
    worst
}

pub fn check_bounded_ratio(space: &FemSpace, mu: &[Vec3], level: usize) -> Report {
    Report::new("|mu_i mu_j / (1 + mu_3)| <= 2", bounded_ratio_max(space, mu, level), 2.0 + 1e-12)
}

#[derive(Clone, Debug, Serialize)]
pub struct InverseBounds {
    pub c1: f64,
    pub c2: f64,
    pub lower: Report,
    pub upper: Report,
}

fn spd_inverse_sqrt_factor(b0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = b0.clone().cholesky().ok_or(Error::NotPositiveDefinite { pivot: 0, value: f64::NAN })?;
    let l = chol.l();
    l.try_inverse().ok_or_else(|| Error::Singular("Cholesky factor of B0".into()))
}

/// Tight constants `c₁ = λ_min(L⁻¹ sym(B) L⁻ᵀ)` and `c₂ = ‖L⁻¹BL⁻ᵀ‖₂`
/// (with `B₀ = LLᵀ`) and the two resulting inverse bounds on random pairs.
/// Both reports carry the worst relative violation (≤ 0 when the bound holds).
pub fn check_inverse_bounds(b: &DMatrix<f64>, b0: &DMatrix<f64>, pairs: usize, seed: u64) -> Result<InverseBounds> {
    let n = b.nrows();
    if b.ncols() != n || b0.nrows() != n || b0.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b0.nrows() });
    }
    let linv = spd_inverse_sqrt_factor(b0)?;
    let c = &linv * b * linv.transpose();
    let sym = (&c + c.transpose()) * 0.5;
    let c1 = SymmetricEigen::new(sym).eigenvalues.min();
    let c2 = c.clone().svd(false, false).singular_values.max();
    if !(c1 > 0.0) {
        return Err(Error::NotPositiveDefinite { pivot: 0, value: c1 });
    }
    let binv = b.clone().try_inverse().ok_or_else(|| Error::Singular("B".into()))?;
    let b0inv = b0.clone().try_inverse().ok_or_else(|| Error::Singular("B0".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..pairs {
        let x = DVector::from_vec(random_vector(&mut rng, n));
        let y = DVector::from_vec(random_vector(&mut rng, n));
        let xbx = x.dot(&(&binv * &x));
        let xb0x = x.dot(&(&b0inv * &x));
        let yb0y = y.dot(&(&b0inv * &y));
        let bound = c1 / (c2 * c2) * xb0x;
        lower = lower.max((bound - xbx) / bound);
        let xby = x.dot(&(&binv * &y));
        let rhs = (xb0x * yb0y).sqrt() / c1;
        upper = upper.max((xby - rhs) / rhs);
    }
    Ok(InverseBounds {
        c1,
        c2,
        lower: Report::new("x.B^-1 x >= c1/c2^2 x.B0^-1 x", lower, 1e-10),
        upper: Report::new("x.B^-1 y <= c1^-1 |x|_B0^-1 |y|_B0^-1", upper, 1e-10),
    })
}

/// `max |A − B|` entrywise.
pub fn max_entry_difference(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

/// Self-check on a random field over a 3×3×3-node cube: frame identities,
/// skew-symmetry of the cross matrix, the energy norm by both routes, and
/// preconditioned GMRES against the dense LU solution for every
/// preconditioner.
pub fn check_suite(seed: u64) -> Result<Vec<Report>> {
    use crate::gmres::{gmres_solve, GmresConfig, ReducedOperator};
    use crate::mesh::{generate_structured_cube, Box3};
    use crate::precond::{self, PrecondKind};
    use crate::tangent::{build_frame, select_tn, TnChoice, FrameStrategy};
    use std::sync::Arc;

    let space = FemSpace::new(generate_structured_cube(Box3::unit(), [2, 2, 2])?);
    let n = space.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = random_unit_field(&mut rng, n);
    let sel = select_tn(&m, TnChoice::Adaptive);
    let mut reports = Vec::new();
    let mut frames = Vec::new();
    for strategy in FrameStrategy::ALL {
        let frame = build_frame(&m, &sel.t, strategy)?;
        for mut r in check_mapping_identities(&frame, &m, 8, seed) {
            r.check = format!("{} [{}]", r.check, strategy.name());
            reports.push(r);
        }
        frames.push(frame);
    }
    let frame = frames.swap_remove(0);

    let cross = csr_to_dense(&space.cross(&m)?.to_csr3());
    reports.push(Report::new("S^T = -S", (&cross + cross.transpose()).amax(), 0.0));

    let mass = Arc::new(space.mass());
    let stiffness = Arc::new(space.stiffness());
    let (alpha, beta_k) = (0.5, 0.1);
    let x = random_vector(&mut rng, 2 * n);
    let en = energy_norm(&space, &mass, &stiffness, &frame, 1.0, beta_k, &x);
    reports.push(Report::new("energy norm: matrix vs element integration", (en.matrix_form - en.fem_form).abs() / en.fem_form, 1e-12));

    let lh = crate::field::NodalField3(random_unit_field(&mut rng, n));
    let system = AssembledSystem {
        alpha,
        beta_k,
        mass: mass.clone(),
        stiffness: stiffness.clone(),
        weighted_mass: space.weighted_mass(&vec![1.0; space.mesh().num_elements()])?,
        cross: space.cross(&m)?,
        rhs: space.rhs(&mass, &stiffness, &m, &lh, 1.0),
    };
    let dense = dense_oracle_solve(&system, &frame)?;
    let op = ReducedOperator::new(&system, &frame);
    let b = op.reduced_rhs();
    let xnorm = dense.x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let cfg = GmresConfig { tol: 1e-13, ..GmresConfig::default() };
    for kind in PrecondKind::ALL {
        let p = precond::build(kind, Some(&frame), &mass, &stiffness, 1.0, beta_k)?;
        let (xg, stats) = gmres_solve(&op, &p, &b, &vec![0.0; b.len()], &cfg)?;
        let err = xg.iter().zip(&dense.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / xnorm;
        let threshold = if stats.converged { 1e-9 } else { 0.0 };
        reports.push(Report::new(format!("GMRES vs dense LU [{}]", kind.name()), err, threshold));
    }
    Ok(reports)
}
