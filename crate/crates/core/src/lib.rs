//! Tangent plane schemes for the Landau–Lifshitz–Gilbert equation with P1
//! finite elements, Householder tangent frames and preconditioned GMRES.

pub mod cholesky;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod field;
pub mod gmres;
pub mod mesh;
pub mod physics;
pub mod precond;
pub mod scheme;
pub mod sparse;
pub mod tangent;
pub mod vec3;

pub use error::{Error, Result};
pub use field::{MagnetizationField, NodalField3};
pub use mesh::{generate_structured_cube, load_mesh, mesh_quality, Box3, Mesh, QualityReport};
