//! Lower-order field contributions `π(m)`, applied fields `f(t, x)` and the
//! SI scaling of the standard problems.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{FemSpace, NodalField3};
use crate::vec3::{self, Vec3};

/// Vacuum permeability in N/A².
pub const MU0: f64 = 4.0 * PI * 1e-7;

/// Material and discretization data in SI units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SIParameters {
    /// Exchange constant `A` (J/m).
    pub a_exchange: f64,
    /// Saturation magnetization `Ms` (A/m).
    pub ms: f64,
    /// Vacuum permeability `μ0` (N/A²).
    pub mu0: f64,
    /// Gyromagnetic ratio `γ0` (m/(A s)).
    pub gamma0: f64,
    /// Length scale `L` (m).
    pub length: f64,
    /// Physical time step `Δt` (s).
    pub dt: f64,
    /// Physical mesh size `Δx` (m).
    pub dx: f64,
}

impl SIParameters {
    /// Permalloy thin film data of the standard problems #4 and #5.
    pub fn permalloy() -> Self {
        SIParameters { a_exchange: 1.3e-11, ms: 8e5, mu0: MU0, gamma0: 2.21e5, length: 1e-9, dt: 0.1e-12, dx: 5e-9 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a_exchange, self.ms, self.mu0, self.gamma0, self.length, self.dt, self.dx];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("SI parameters must be strictly positive".into()))
        }
    }
}

/// Dimensionless `ℓ_ex²`, time step and mesh size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nondimensional {
    pub ell_ex2: f64,
    pub k: f64,
    pub h: f64,
}

pub fn nondimensionalize(si: &SIParameters) -> Nondimensional {
    Nondimensional {
        ell_ex2: 2.0 * si.a_exchange / (si.mu0 * si.ms * si.ms * si.length * si.length),
        k: si.gamma0 * si.ms * si.dt,
        h: si.dx / si.length,
    }
}

/// Converts `μ0 H` given in millitesla to the dimensionless applied field,
/// using the convention `f = (μ0 H)/μ0`.
pub fn field_from_millitesla(mu0_h_mt: Vec3) -> Vec3 {
    vec3::scale(1e-3 / MU0, mu0_h_mt)
}

/// Second switching field of standard problem #4.
pub fn applied_field_mumag4() -> Vec3 {
    field_from_millitesla([-35.5, -6.3, 0.0])
}

/// Dimensionless spin velocity `u = (γ0 Ms L)⁻¹ (u_phys, 0, 0)` of standard
/// problem #5.
pub fn zhang_li_velocity(si: &SIParameters, u_phys: f64) -> Vec3 {
    [u_phys / (si.gamma0 * si.ms * si.length), 0.0, 0.0]
}

/// Spin velocity magnitude (m/s) of standard problem #5.
pub const MUMAG5_U: f64 = 72.17;
/// Non-adiabaticity constant of standard problem #5.
pub const MUMAG5_BETA: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PiKind {
    #[default]
    Zero,
    /// `π(m) = s (m·a) a`
    Uniaxial { axis: Vec3, strength: f64 },
    /// `π(m) = m × (u·∇)m + β (u·∇)m`
    ZhangLi { u: Vec3, beta_zl: f64 },
}

impl PiKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            PiKind::Zero => Ok(()),
            PiKind::Uniaxial { axis, strength } => {
                if (vec3::norm(*axis) - 1.0).abs() > 1e-12 || !strength.is_finite() {
                    return Err(Error::InvalidParameter("uniaxial anisotropy needs a unit axis and finite strength".into()));
                }
                Ok(())
            }
            PiKind::ZhangLi { u, beta_zl } => {
                if u.iter().chain(std::iter::once(beta_zl)).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("Zhang-Li parameters must be finite".into()));
                }
                Ok(())
            }
        }
    }

    /// `C` with `‖π(m)‖∞ ≤ C (1 + max_K |∇m|_K|)` for nodally unit `m`.
    pub fn bound_constant(&self) -> f64 {
        match self {
            PiKind::Zero => 0.0,
            PiKind::Uniaxial { strength, .. } => strength.abs(),
            PiKind::ZhangLi { u, beta_zl } => (1.0 + beta_zl.abs()) * vec3::norm(*u),
        }
    }
}

/// Time- and space-dependent applied field `f(t, x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AppliedField {
    Constant { value: Vec3 },
    /// `a (sin x₁, cos x₁, 0)`
    Academic {
        #[serde(default = "default_academic_amplitude")]
        amplitude: f64,
    },
    /// `t · value`
    Ramp { value: Vec3 },
}

fn default_academic_amplitude() -> f64 {
    10.0
}

impl Default for AppliedField {
    fn default() -> Self {
        AppliedField::Constant { value: [0.0; 3] }
    }
}

impl AppliedField {
    pub fn eval(&self, t: f64, x: Vec3) -> Vec3 {
        match self {
            AppliedField::Constant { value } => *value,
            AppliedField::Academic { amplitude } => [amplitude * x[0].sin(), amplitude * x[0].cos(), 0.0],
            AppliedField::Ramp { value } => vec3::scale(t, *value),
        }
    }

    /// Nodal interpolant at time `t`.
    pub fn interpolate(&self, nodes: &[Vec3], t: f64) -> NodalField3 {
        NodalField3(nodes.iter().map(|&x| self.eval(t, x)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct EffectiveFieldConfig {
    #[serde(default)]
    pub pi: PiKind,
    #[serde(default)]
    pub applied: AppliedField,
}

/// Volume-weighted average of the adjacent element gradients at each node;
/// entry `[c][d]` is `∂_d m_c`.
pub fn recovered_nodal_gradients(space: &FemSpace, m: &[Vec3]) -> Vec<[[f64; 3]; 3]> {
    let mesh = space.mesh();
    let mut acc = vec![[[0.0; 3]; 3]; mesh.num_nodes()];
    let mut weight = vec![0.0; mesh.num_nodes()];
    for (e, t) in mesh.tets().iter().enumerate() {
        let g = space.element_gradient(e, m);
        let vol = mesh.volumes()[e];
        for &a in t {
            weight[a] += vol;
            for c in 0..3 {
                for d in 0..3 {
                    acc[a][c][d] += vol * g[c][d];
                }
            }
        }
    }
    for (g, w) in acc.iter_mut().zip(&weight) {
        for row in g.iter_mut() {
            for v in row.iter_mut() {
                *v /= w;
            }
        }
    }
    acc
}

/// Nodal values of `π(m)`.
pub fn pi_apply(pi: &PiKind, space: &FemSpace, m: &[Vec3]) -> NodalField3 {
    match pi {
        PiKind::Zero => NodalField3::zeros(m.len()),
        PiKind::Uniaxial { axis, strength } => {
            NodalField3(m.iter().map(|&v| vec3::scale(strength * vec3::dot(v, *axis), *axis)).collect())
        }
        PiKind::ZhangLi { u, beta_zl } => {
            let grads = recovered_nodal_gradients(space, m);
            NodalField3(
                m.iter()
                    .zip(&grads)
                    .map(|(&v, g)| {
                        let du = [vec3::dot(g[0], *u), vec3::dot(g[1], *u), vec3::dot(g[2], *u)];
                        vec3::axpy(vec3::cross(v, du), *beta_zl, du)
                    })
                    .collect(),
            )
        }
    }
}
