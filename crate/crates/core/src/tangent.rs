//! Orthonormal tangent frames and the block matrix `Q[m]`.
//!
//! Each node carries a 3×2 block whose columns span the plane orthogonal to
//! `m(z)`. The global involution `T` (one of six signed axis permutations)
//! is applied as `T·H[T m]`, which moves the singular point of the
//! Householder construction away from the nodal values actually present.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{self, Mat3, Vec3, E1, E2, E3};

pub use crate::field::MagnetizationField;

/// Input tolerance on `|m| = 1` for the per-node frame constructors.
pub const FRAME_UNIT_TOLERANCE: f64 = 1e-12;
/// Below this value of `|m + e₃|` the reflection is replaced by `diag(1,1,-1)`.
pub const HOUSEHOLDER_GUARD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FrameStrategy {
    #[default]
    Householder,
    #[serde(alias = "sign-flip", alias = "sign_flip")]
    SignFlip,
    Rotation,
}

impl FrameStrategy {
    pub const ALL: [FrameStrategy; 3] = [FrameStrategy::Householder, FrameStrategy::SignFlip, FrameStrategy::Rotation];

    pub fn name(self) -> &'static str {
        match self {
            FrameStrategy::Householder => "householder",
            FrameStrategy::SignFlip => "signflip",
            FrameStrategy::Rotation => "rotation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "householder" => Some(FrameStrategy::Householder),
            "signflip" | "sign-flip" | "sign_flip" => Some(FrameStrategy::SignFlip),
            "rotation" => Some(FrameStrategy::Rotation),
            _ => None,
        }
    }
}

/// The six symmetric orthogonal involutions used for `Tₙ`, in their
/// tie-breaking order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TnCandidate {
    T1Plus,
    T1Minus,
    T2Plus,
    T2Minus,
    T3Plus,
    T3Minus,
}

impl TnCandidate {
    pub const ALL: [TnCandidate; 6] = [
        TnCandidate::T1Plus,
        TnCandidate::T1Minus,
        TnCandidate::T2Plus,
        TnCandidate::T2Minus,
        TnCandidate::T3Plus,
        TnCandidate::T3Minus,
    ];

    pub fn matrix(self) -> Mat3 {
        let n = |v: Vec3| vec3::scale(-1.0, v);
        match self {
            TnCandidate::T1Plus => vec3::from_columns(n(E3), E2, n(E1)),
            TnCandidate::T1Minus => vec3::from_columns(E3, E2, E1),
            TnCandidate::T2Plus => vec3::from_columns(E1, n(E3), n(E2)),
            TnCandidate::T2Minus => vec3::from_columns(E1, E3, E2),
            TnCandidate::T3Plus => vec3::from_columns(E1, E2, n(E3)),
            TnCandidate::T3Minus => vec3::IDENTITY,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TnCandidate::T1Plus => "t1+",
            TnCandidate::T1Minus => "t1-",
            TnCandidate::T2Plus => "t2+",
            TnCandidate::T2Minus => "t2-",
            TnCandidate::T3Plus => "t3+",
            TnCandidate::T3Minus => "t3-",
        }
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }
}

/// How `Tₙ` is chosen at each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TnChoice {
    #[default]
    Adaptive,
    Fixed(TnCandidate),
}

impl TnChoice {
    pub fn name(self) -> &'static str {
        match self {
            TnChoice::Adaptive => "adaptive",
            TnChoice::Fixed(c) => c.name(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == "adaptive" {
            return Some(TnChoice::Adaptive);
        }
        TnCandidate::ALL.iter().find(|c| c.name() == s).map(|&c| TnChoice::Fixed(c))
    }
}

impl Serialize for TnChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for TnChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        TnChoice::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown Tn mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameSelection {
    /// `d_ℓ^+ = 1 − max_z m_ℓ(z)`
    pub d_plus: Vec3,
    /// `d_ℓ^- = 1 + min_z m_ℓ(z)`
    pub d_minus: Vec3,
    pub chosen: TnCandidate,
    pub t: Mat3,
    /// `min_z 1 + m(z)·(T e₃)`
    pub gamma: f64,
}

impl FrameSelection {
    /// The six `d` values in tie-breaking order `(1+, 1−, 2+, 2−, 3+, 3−)`.
    pub fn d_values(&self) -> [f64; 6] {
        [self.d_plus[0], self.d_minus[0], self.d_plus[1], self.d_minus[1], self.d_plus[2], self.d_minus[2]]
    }

    /// `d` value of the chosen candidate.
    pub fn d_chosen(&self) -> f64 {
        self.d_values()[self.chosen.index()]
    }
}

fn check_unit(m: Vec3) -> Result<()> {
    let n = vec3::norm(m);
    if !n.is_finite() || (n - 1.0).abs() > FRAME_UNIT_TOLERANCE {
        return Err(Error::NotUnit { node: 0, norm: n });
    }
    Ok(())
}

/// `m + σe₃`; for `σm₃ < 0` the third entry is evaluated as
/// `σ(m₁² + m₂²)/(|m| + |m₃|)` to avoid cancellation near `m = −σe₃`,
/// which keeps the reflected columns tangent to rounding accuracy.
fn reflection_vector(m: Vec3, sigma: f64) -> Vec3 {
    if sigma * m[2] < 0.0 {
        let r = vec3::norm(m);
        [m[0], m[1], sigma * (m[0] * m[0] + m[1] * m[1]) / (r + m[2].abs())]
    } else {
        vec3::axpy(m, sigma, E3)
    }
}

fn reflect_basis(m: Vec3, sigma: f64) -> [Vec3; 2] {
    let u = reflection_vector(m, sigma);
    let len = vec3::norm(u);
    if len < HOUSEHOLDER_GUARD {
        return [E1, E2];
    }
    let w = vec3::scale(1.0 / len, u);
    let col = |e: Vec3, wi: f64| vec3::axpy(e, -2.0 * wi, w);
    [col(E1, w[0]), col(E2, w[1])]
}

/// `H[m] = [H̃e₁, H̃e₂]` with `H̃ = I − 2wwᵀ`, `w = (m+e₃)/|m+e₃|`.
pub fn householder_frame(m: Vec3) -> Result<[Vec3; 2]> {
    check_unit(m)?;
    Ok(reflect_basis(m, 1.0))
}

/// Full reflection `H̃[m]`, with columns `H̃e₁, H̃e₂, H̃e₃`.
pub fn householder_matrix(m: Vec3) -> Result<Mat3> {
    check_unit(m)?;
    let u = reflection_vector(m, 1.0);
    let len = vec3::norm(u);
    if len < HOUSEHOLDER_GUARD {
        return Ok(vec3::from_columns(E1, E2, vec3::scale(-1.0, E3)));
    }
    let w = vec3::scale(1.0 / len, u);
    let mut h = vec3::IDENTITY;
    for (r, row) in h.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v -= 2.0 * w[r] * w[c];
        }
    }
    Ok(h)
}

/// Alternative frames with orthonormal columns spanning `m^⊥`.
pub fn alt_frame(m: Vec3, strategy: FrameStrategy) -> Result<[Vec3; 2]> {
    check_unit(m)?;
    Ok(match strategy {
        FrameStrategy::Householder => reflect_basis(m, 1.0),
        FrameStrategy::SignFlip => {
            let sigma = if m[2] < 0.0 { -1.0 } else { 1.0 };
            reflect_basis(m, sigma)
        }
        FrameStrategy::Rotation => {
            let axis = vec3::cross(E3, m);
            let s = vec3::norm(axis);
            if s == 0.0 {
                reflect_basis(m, 1.0)
            } else {
                let a = vec3::scale(1.0 / s, axis);
                let c = m[2];
                let rot = |v: Vec3| {
                    let mut r = vec3::scale(c, v);
                    r = vec3::axpy(r, s, vec3::cross(a, v));
                    vec3::axpy(r, vec3::dot(a, v) * (1.0 - c), a)
                };
                [rot(E1), rot(E2)]
            }
        }
    })
}

fn frame_for(m: Vec3, strategy: FrameStrategy) -> Result<[Vec3; 2]> {
    alt_frame(m, strategy)
}

/// Computes all six `d` values and picks the maximizer.
pub fn select_tn_adaptive(m: &[Vec3]) -> FrameSelection {
    let mut max = [f64::NEG_INFINITY; 3];
    let mut min = [f64::INFINITY; 3];
    for v in m {
        for l in 0..3 {
            max[l] = max[l].max(v[l]);
            min[l] = min[l].min(v[l]);
        }
    }
    let d_plus = [1.0 - max[0], 1.0 - max[1], 1.0 - max[2]];
    let d_minus = [1.0 + min[0], 1.0 + min[1], 1.0 + min[2]];
    let d = [d_plus[0], d_minus[0], d_plus[1], d_minus[1], d_plus[2], d_minus[2]];
    let mut best = 0;
    for (i, &v) in d.iter().enumerate() {
        if v > d[best] {
            best = i;
        }
    }
    let chosen = TnCandidate::ALL[best];
    let t = chosen.matrix();
    FrameSelection { d_plus, d_minus, chosen, t, gamma: gamma_for(m, &t) }
}

/// Selection report for an externally fixed candidate.
pub fn select_tn_fixed(m: &[Vec3], chosen: TnCandidate) -> FrameSelection {
    let mut sel = select_tn_adaptive(m);
    sel.chosen = chosen;
    sel.t = chosen.matrix();
    sel.gamma = gamma_for(m, &sel.t);
    sel
}

pub fn select_tn(m: &[Vec3], choice: TnChoice) -> FrameSelection {
    match choice {
        TnChoice::Adaptive => select_tn_adaptive(m),
        TnChoice::Fixed(c) => select_tn_fixed(m, c),
    }
}

/// `min_z 1 + m(z)·(T e₃)`
pub fn gamma_for(m: &[Vec3], t: &Mat3) -> f64 {
    let te3 = vec3::column(t, 2);
    m.iter().map(|&v| 1.0 + vec3::dot(v, te3)).fold(f64::INFINITY, f64::min)
}

/// `Q[m]`: per-node 3×2 blocks `T · frame(T m(z))`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentFrame {
    pub t: Mat3,
    pub strategy: FrameStrategy,
    blocks: Vec<[Vec3; 2]>,
}

/// Builds `Q[m]`. `T` must be a symmetric involution.
pub fn build_frame(m: &[Vec3], t: &Mat3, strategy: FrameStrategy) -> Result<TangentFrame> {
    let tt = vec3::mat_mul(t, t);
    let sym = (0..3).all(|i| (0..3).all(|j| t[i][j] == t[j][i]));
    let inv = (0..3).all(|i| (0..3).all(|j| (tt[i][j] - vec3::IDENTITY[i][j]).abs() <= 1e-14));
    if !sym || !inv {
        return Err(Error::InvalidParameter("T must satisfy T = T^T = T^-1".into()));
    }
    let mut blocks = Vec::with_capacity(m.len());
    for (node, &v) in m.iter().enumerate() {
        let cols = frame_for(vec3::mat_vec(t, v), strategy).map_err(|e| match e {
            Error::NotUnit { norm, .. } => Error::NotUnit { node, norm },
            other => other,
        })?;
        blocks.push([vec3::mat_vec(t, cols[0]), vec3::mat_vec(t, cols[1])]);
    }
    Ok(TangentFrame { t: *t, strategy, blocks })
}

impl TangentFrame {
    /// Wraps explicitly given blocks (used by tests and oracles).
    pub fn from_blocks(t: Mat3, strategy: FrameStrategy, blocks: Vec<[Vec3; 2]>) -> Self {
        TangentFrame { t, strategy, blocks }
    }

    pub fn num_nodes(&self) -> usize {
        self.blocks.len()
    }

    /// Columns of block `i`.
    pub fn block(&self, i: usize) -> [Vec3; 2] {
        self.blocks[i]
    }

    pub fn blocks(&self) -> &[[Vec3; 2]] {
        &self.blocks
    }

    /// `v = Q x`
    pub fn apply_q_into(&self, x: &[f64], v: &mut [f64]) {
        for (i, b) in self.blocks.iter().enumerate() {
            let (x0, x1) = (x[2 * i], x[2 * i + 1]);
            for c in 0..3 {
                v[3 * i + c] = b[0][c] * x0 + b[1][c] * x1;
            }
        }
    }

    /// `x = Qᵀ y`
    pub fn apply_qt_into(&self, y: &[f64], x: &mut [f64]) {
        for (i, b) in self.blocks.iter().enumerate() {
            let yi = [y[3 * i], y[3 * i + 1], y[3 * i + 2]];
            x[2 * i] = vec3::dot(b[0], yi);
            x[2 * i + 1] = vec3::dot(b[1], yi);
        }
    }

    fn check(&self, len: usize, per_node: usize) -> Result<()> {
        let expected = per_node * self.blocks.len();
        if len != expected {
            return Err(Error::DimensionMismatch { expected, got: len });
        }
        Ok(())
    }

    pub fn apply_q(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x.len(), 2)?;
        let mut v = vec![0.0; 3 * self.blocks.len()];
        self.apply_q_into(x, &mut v);
        Ok(v)
    }

    pub fn apply_qt(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y.len(), 3)?;
        let mut x = vec![0.0; 2 * self.blocks.len()];
        self.apply_qt_into(y, &mut x);
        Ok(x)
    }

    /// `max_i |blockᵢᵀ m(zᵢ)|`
    pub fn max_tangency_defect(&self, m: &[Vec3]) -> f64 {
        self.blocks
            .iter()
            .zip(m)
            .map(|(b, &v)| vec3::dot(b[0], v).abs().max(vec3::dot(b[1], v).abs()))
            .fold(0.0, f64::max)
    }

    /// `max_i |blockᵢᵀ blockᵢ − I₂|`
    pub fn max_orthonormality_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let d00 = (vec3::dot(b[0], b[0]) - 1.0).abs();
                let d11 = (vec3::dot(b[1], b[1]) - 1.0).abs();
                let d01 = vec3::dot(b[0], b[1]).abs();
                d00.max(d11).max(d01)
            })
            .fold(0.0, f64::max)
    }
}

pub fn apply_q(frame: &TangentFrame, x: &[f64]) -> Result<Vec<f64>> {
    frame.apply_q(x)
}

pub fn apply_qt(frame: &TangentFrame, y: &[f64]) -> Result<Vec<f64>> {
    frame.apply_qt(y)
}
