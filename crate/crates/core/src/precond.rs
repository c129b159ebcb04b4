//! Preconditioners for the reduced tangent-space system.
//!
//! All variants are built around the scalar SPD matrix
//! `B = α_P M + β(k)k L`. The stationary and practical variants share one
//! factorization of `B`; the theoretical variant factors the frame-dependent
//! `Qᵀ(B ⊗ I₃)Q` and therefore has to be rebuilt when the frame changes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cholesky::EnvelopeCholesky;
use crate::error::{Error, Result};
use crate::fem::ScalarMatrix;
use crate::sparse::CsrMatrix;
use crate::tangent::TangentFrame;
use crate::vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecondKind {
    Theoretical,
    #[serde(alias = "stationary2d")]
    Stationary,
    Practical,
    Jacobi,
    None,
}

impl PrecondKind {
    pub const ALL: [PrecondKind; 5] =
        [PrecondKind::Theoretical, PrecondKind::Stationary, PrecondKind::Practical, PrecondKind::Jacobi, PrecondKind::None];

    pub fn name(self) -> &'static str {
        match self {
            PrecondKind::Theoretical => "theoretical",
            PrecondKind::Stationary => "stationary",
            PrecondKind::Practical => "practical",
            PrecondKind::Jacobi => "jacobi",
            PrecondKind::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stationary2d" => Some(PrecondKind::Stationary),
            _ => Self::ALL.iter().copied().find(|k| k.name() == s),
        }
    }

    /// Whether the preconditioner depends on the tangent frame.
    pub fn needs_frame(self) -> bool {
        matches!(self, PrecondKind::Theoretical | PrecondKind::Practical)
    }
}

/// `B = α_P M + β(k)k L` together with its Cholesky factor.
#[derive(Debug)]
pub struct ScalarFactor {
    pub alpha_p: f64,
    pub beta_k: f64,
    pub matrix: CsrMatrix,
    pub factor: EnvelopeCholesky,
}

impl ScalarFactor {
    pub fn new(mass: &ScalarMatrix, stiffness: &ScalarMatrix, alpha_p: f64, beta_k: f64) -> Result<Arc<Self>> {
        check_parameters(alpha_p, beta_k)?;
        let matrix = inner_matrix(mass, stiffness, alpha_p, beta_k);
        let factor = EnvelopeCholesky::factor(&matrix)?;
        Ok(Arc::new(ScalarFactor { alpha_p, beta_k, matrix, factor }))
    }
}

fn check_parameters(alpha_p: f64, beta_k: f64) -> Result<()> {
    if !(alpha_p > 0.0) || !alpha_p.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha_P must be positive, got {alpha_p}")));
    }
    if !(beta_k >= 0.0) || !beta_k.is_finite() {
        return Err(Error::InvalidParameter(format!("beta(k)k must be non-negative, got {beta_k}")));
    }
    Ok(())
}

/// Scalar `α_P M + β(k)k L`.
pub fn inner_matrix(mass: &ScalarMatrix, stiffness: &ScalarMatrix, alpha_p: f64, beta_k: f64) -> CsrMatrix {
    CsrMatrix::linear_combination(alpha_p, &mass.matrix, beta_k, &stiffness.matrix)
}

/// `Qᵀ(B ⊗ I₃)Q` as a sparse 2N×2N matrix; node block `(i,j)` is
/// `B_ij QᵢᵀQⱼ`.
pub fn reduced_inner_matrix(b: &CsrMatrix, frame: &TangentFrame) -> CsrMatrix {
    let n = b.nrows();
    let mut t = Vec::with_capacity(4 * b.nnz());
    for i in 0..n {
        let qi = frame.block(i);
        let (cols, vals) = b.row(i);
        for (&j, &bij) in cols.iter().zip(vals) {
            let qj = frame.block(j);
            for a in 0..2 {
                for c in 0..2 {
                    t.push((2 * i + a, 2 * j + c, bij * vec3::dot(qi[a], qj[c])));
                }
            }
        }
    }
    CsrMatrix::from_triplets(2 * n, 2 * n, &t)
}

#[derive(Debug, Clone)]
enum Inner {
    Theoretical { factor: Arc<EnvelopeCholesky> },
    Stationary { scalar: Arc<ScalarFactor> },
    Practical { scalar: Arc<ScalarFactor>, frame: Arc<TangentFrame> },
    Jacobi { inv_diag: Vec<f64> },
    None,
}

/// A symmetric positive definite action on `R^{2N}`.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    kind: PrecondKind,
    alpha_p: f64,
    beta_k: f64,
    n: usize,
    inner: Inner,
}

impl Preconditioner {
    pub fn kind(&self) -> PrecondKind {
        self.kind
    }

    pub fn alpha_p(&self) -> f64 {
        self.alpha_p
    }

    pub fn beta_k(&self) -> f64 {
        self.beta_k
    }

    /// Dimension `2N` of the vectors it acts on.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Identity on `R^{2n}` for `n` nodes.
    pub fn identity(n: usize) -> Self {
        Preconditioner { kind: PrecondKind::None, alpha_p: 1.0, beta_k: 0.0, n, inner: Inner::None }
    }

    pub fn theoretical(frame: &TangentFrame, mass: &ScalarMatrix, stiffness: &ScalarMatrix, alpha_p: f64, beta_k: f64) -> Result<Self> {
        check_parameters(alpha_p, beta_k)?;
        let b = inner_matrix(mass, stiffness, alpha_p, beta_k);
        if frame.num_nodes() != b.nrows() {
            return Err(Error::DimensionMismatch { expected: b.nrows(), got: frame.num_nodes() });
        }
        let factor = EnvelopeCholesky::factor(&reduced_inner_matrix(&b, frame))?;
        Ok(Preconditioner {
            kind: PrecondKind::Theoretical,
            alpha_p,
            beta_k,
            n: b.nrows(),
            inner: Inner::Theoretical { factor: Arc::new(factor) },
        })
    }

    pub fn stationary(scalar: Arc<ScalarFactor>) -> Self {
        Preconditioner {
            kind: PrecondKind::Stationary,
            alpha_p: scalar.alpha_p,
            beta_k: scalar.beta_k,
            n: scalar.matrix.nrows(),
            inner: Inner::Stationary { scalar },
        }
    }

    pub fn practical(scalar: Arc<ScalarFactor>, frame: Arc<TangentFrame>) -> Result<Self> {
        if frame.num_nodes() != scalar.matrix.nrows() {
            return Err(Error::DimensionMismatch { expected: scalar.matrix.nrows(), got: frame.num_nodes() });
        }
        Ok(Preconditioner {
            kind: PrecondKind::Practical,
            alpha_p: scalar.alpha_p,
            beta_k: scalar.beta_k,
            n: scalar.matrix.nrows(),
            inner: Inner::Practical { scalar, frame },
        })
    }

    pub fn jacobi(mass: &ScalarMatrix, stiffness: &ScalarMatrix, alpha_p: f64, beta_k: f64) -> Result<Self> {
        check_parameters(alpha_p, beta_k)?;
        let b = inner_matrix(mass, stiffness, alpha_p, beta_k);
        let mut inv_diag = Vec::with_capacity(b.nrows());
        for (i, d) in b.diagonal().into_iter().enumerate() {
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: i, value: d });
            }
            inv_diag.push(1.0 / d);
        }
        Ok(Preconditioner { kind: PrecondKind::Jacobi, alpha_p, beta_k, n: b.nrows(), inner: Inner::Jacobi { inv_diag } })
    }

    /// `z = P r` without dimension checks.
    pub fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        match &self.inner {
            Inner::None => z.copy_from_slice(r),
            Inner::Jacobi { inv_diag } => {
                for (i, d) in inv_diag.iter().enumerate() {
                    z[2 * i] = r[2 * i] * d;
                    z[2 * i + 1] = r[2 * i + 1] * d;
                }
            }
            Inner::Stationary { scalar } => scalar.factor.solve_blocked_into(2, r, z),
            Inner::Theoretical { factor } => factor.solve_into(r, z),
            Inner::Practical { scalar, frame } => {
                let mut v = vec![0.0; 3 * self.n];
                frame.apply_q_into(r, &mut v);
                let mut w = vec![0.0; 3 * self.n];
                scalar.factor.solve_blocked_into(3, &v, &mut w);
                frame.apply_qt_into(&w, z);
            }
        }
    }

    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: r.len() });
        }
        let mut z = vec![0.0; r.len()];
        self.apply_into(r, &mut z);
        Ok(z)
    }
}

pub fn build_theoretical(frame: &TangentFrame, mass: &ScalarMatrix, stiffness: &ScalarMatrix, alpha_p: f64, beta_k: f64) -> Result<Preconditioner> {
    Preconditioner::theoretical(frame, mass, stiffness, alpha_p, beta_k)
}

pub fn build_stationary_2d(mass: &ScalarMatrix, stiffness: &ScalarMatrix, alpha_p: f64, beta_k: f64) -> Result<Preconditioner> {
    Ok(Preconditioner::stationary(ScalarFactor::new(mass, stiffness, alpha_p, beta_k)?))
}

pub fn build_practical(frame: &TangentFrame, mass: &ScalarMatrix, stiffness: &ScalarMatrix, alpha_p: f64, beta_k: f64) -> Result<Preconditioner> {
    Preconditioner::practical(ScalarFactor::new(mass, stiffness, alpha_p, beta_k)?, Arc::new(frame.clone()))
}

pub fn build_jacobi(mass: &ScalarMatrix, stiffness: &ScalarMatrix, alpha_p: f64, beta_k: f64) -> Result<Preconditioner> {
    Preconditioner::jacobi(mass, stiffness, alpha_p, beta_k)
}

pub fn apply(precond: &Preconditioner, r: &[f64]) -> Result<Vec<f64>> {
    precond.apply(r)
}

/// Builds any kind; frame-dependent kinds require `frame`.
pub fn build(
    kind: PrecondKind,
    frame: Option<&TangentFrame>,
    mass: &ScalarMatrix,
    stiffness: &ScalarMatrix,
    alpha_p: f64,
    beta_k: f64,
) -> Result<Preconditioner> {
    let need = || Error::InvalidParameter(format!("{} preconditioner needs a tangent frame", kind.name()));
    match kind {
        PrecondKind::Theoretical => build_theoretical(frame.ok_or_else(need)?, mass, stiffness, alpha_p, beta_k),
        PrecondKind::Stationary => build_stationary_2d(mass, stiffness, alpha_p, beta_k),
        PrecondKind::Practical => build_practical(frame.ok_or_else(need)?, mass, stiffness, alpha_p, beta_k),
        PrecondKind::Jacobi => build_jacobi(mass, stiffness, alpha_p, beta_k),
        PrecondKind::None => {
            check_parameters(alpha_p, beta_k)?;
            Ok(Preconditioner::identity(mass.n()))
        }
    }
}
