//! Nodal vector fields on a P1 mesh.
//!
//! Flat vectors use node-major interleaving: entry `3*j + c` is component
//! `c` at node `j`, matching the basis `φ_j e_c`.

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

/// Tolerance on `| |m(z)| - 1 |` accepted by [`MagnetizationField::new`].
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Coefficients of a P1 vector field, one 3-vector per node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField3(pub Vec<Vec3>);

impl NodalField3 {
    pub fn zeros(n: usize) -> Self {
        NodalField3(vec![[0.0; 3]; n])
    }

    pub fn constant(n: usize, v: Vec3) -> Self {
        NodalField3(vec![v; n])
    }

    pub fn from_flat(x: &[f64]) -> Self {
        assert_eq!(x.len() % 3, 0);
        NodalField3(x.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.0.iter().flat_map(|v| v.iter().copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Vec3] {
        &self.0
    }

    /// `max_z |v(z)|`
    pub fn max_norm(&self) -> f64 {
        self.0.iter().map(|&v| vec3::norm(v)).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.iter().all(|c| c.is_finite()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        NodalField3(self.0.iter().map(|&v| vec3::scale(s, v)).collect())
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &NodalField3) -> Self {
        assert_eq!(self.len(), other.len());
        NodalField3(self.0.iter().zip(&other.0).map(|(&a, &b)| vec3::axpy(a, s, b)).collect())
    }
}

/// Nodal values of a field in `M_h`: unit length at every node.
#[derive(Clone, Debug, PartialEq)]
pub struct MagnetizationField(Vec<Vec3>);

impl MagnetizationField {
    /// Validates `| |m(z)| - 1 | <= UNIT_TOLERANCE` at every node.
    pub fn new(values: Vec<Vec3>) -> Result<Self> {
        for (node, &v) in values.iter().enumerate() {
            let n = vec3::norm(v);
            if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::NotUnit { node, norm: n });
            }
        }
        Ok(MagnetizationField(values))
    }

    /// Normalizes every nodal vector. Zero vectors are rejected.
    pub fn normalized(values: Vec<Vec3>) -> Result<Self> {
        let mut out = Vec::with_capacity(values.len());
        for (node, v) in values.into_iter().enumerate() {
            let n = vec3::norm(v);
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::NotUnit { node, norm: n });
            }
            out.push(vec3::scale(1.0 / n, v));
        }
        Ok(MagnetizationField(out))
    }

    pub fn uniform(n: usize, direction: Vec3) -> Result<Self> {
        Self::normalized(vec![direction; n])
    }

    /// Wraps values without the unit-length check. Used by the
    /// projection-free variant of the scheme, whose iterates grow in length.
    pub fn from_values_unchecked(values: Vec<Vec3>) -> Self {
        MagnetizationField(values)
    }

    pub fn values(&self) -> &[Vec3] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_nodal(&self) -> NodalField3 {
        NodalField3(self.0.clone())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.0.iter().flat_map(|v| v.iter().copied()).collect()
    }

    /// `max_z | |m(z)| - 1 |`
    pub fn max_unit_deviation(&self) -> f64 {
        self.0.iter().map(|&v| (vec3::norm(v) - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Nodal directions `m(z)/|m(z)|`.
    pub fn directions(&self) -> Vec<Vec3> {
        self.0.iter().map(|&v| vec3::normalize(v)).collect()
    }
}

impl std::ops::Neg for &MagnetizationField {
    type Output = MagnetizationField;
    fn neg(self) -> MagnetizationField {
        MagnetizationField(self.0.iter().map(|&v| vec3::scale(-1.0, v)).collect())
    }
}
