//! Tetrahedral meshes: structured box generation, JSON I/O and
//! quasi-uniformity metrics.
//!
//! A [`Mesh`] is immutable once built. Every element is stored with positive
//! orientation, i.e. `det[x1-x0, x2-x0, x3-x0] > 0`.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

/// Axis-aligned box `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Box3 {
    pub min: Vec3,
    pub max: Vec3,
}

impl Box3 {
    pub fn unit() -> Self {
        Box3 { min: [0.0; 3], max: [1.0; 3] }
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|d| self.max[d] - self.min[d]).product()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nodes: Vec<Vec3>,
    tets: Vec<[usize; 4]>,
    volumes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    nodes: Vec<Vec3>,
    tets: Vec<[usize; 4]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QualityReport {
    /// `min_K |K|^{1/3}`
    pub h: f64,
    pub max_diam: f64,
    /// `max_K diam(K) / h`
    pub c_mesh: f64,
    pub min_vol: f64,
    pub max_vol: f64,
}

fn signed_volume(nodes: &[Vec3], tet: &[usize; 4]) -> f64 {
    let x0 = nodes[tet[0]];
    let a = vec3::sub(nodes[tet[1]], x0);
    let b = vec3::sub(nodes[tet[2]], x0);
    let c = vec3::sub(nodes[tet[3]], x0);
    vec3::dot(a, vec3::cross(b, c)) / 6.0
}

impl Mesh {
    /// Validates and builds a mesh. Elements must be positively oriented.
    pub fn new(nodes: Vec<Vec3>, tets: Vec<[usize; 4]>) -> Result<Self> {
        Self::build(nodes, tets, false)
    }

    /// Like [`Mesh::new`], but flips negatively oriented elements instead of
    /// rejecting them. Degenerate elements are still an error.
    pub fn new_reoriented(nodes: Vec<Vec3>, tets: Vec<[usize; 4]>) -> Result<Self> {
        Self::build(nodes, tets, true)
    }

    fn build(nodes: Vec<Vec3>, mut tets: Vec<[usize; 4]>, reorient: bool) -> Result<Self> {
        let n = nodes.len();
        if n == 0 || tets.is_empty() {
            return Err(Error::InvalidMesh("mesh needs at least one element".into()));
        }
        if let Some(i) = nodes.iter().position(|x| x.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidMesh(format!("node {i} has non-finite coordinates")));
        }
        let mut volumes = Vec::with_capacity(tets.len());
        for (e, tet) in tets.iter_mut().enumerate() {
            if let Some(&bad) = tet.iter().find(|&&i| i >= n) {
                return Err(Error::BadElement {
                    element: e,
                    reason: format!("node index {bad} out of range (N = {n})"),
                });
            }
            for a in 0..4 {
                for b in a + 1..4 {
                    if tet[a] == tet[b] {
                        return Err(Error::BadElement {
                            element: e,
                            reason: format!("repeated node index {}", tet[a]),
                        });
                    }
                }
            }
            let mut vol = signed_volume(&nodes, tet);
            let scale = (0..3)
                .map(|d| {
                    let lo = tet.iter().map(|&i| nodes[i][d]).fold(f64::INFINITY, f64::min);
                    let hi = tet.iter().map(|&i| nodes[i][d]).fold(f64::NEG_INFINITY, f64::max);
                    hi - lo
                })
                .fold(0.0, f64::max);
            if vol.abs() <= 1e-14 * scale.powi(3) {
                return Err(Error::BadElement { element: e, reason: "degenerate (zero volume)".into() });
            }
            if vol < 0.0 {
                if !reorient {
                    return Err(Error::BadElement {
                        element: e,
                        reason: format!("negative volume {vol:e}"),
                    });
                }
                tet.swap(2, 3);
                vol = -vol;
            }
            volumes.push(vol);
        }
        check_conforming(&tets)?;
        Ok(Mesh { nodes, tets, volumes })
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.tets.len()
    }

    /// Element volumes `|K|`, all strictly positive.
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn element_nodes(&self, e: usize) -> [Vec3; 4] {
        let t = &self.tets[e];
        [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]], self.nodes[t[3]]]
    }

    pub fn diameter(&self, e: usize) -> f64 {
        let x = self.element_nodes(e);
        let mut d: f64 = 0.0;
        for a in 0..4 {
            for b in a + 1..4 {
                d = d.max(vec3::norm(vec3::sub(x[a], x[b])));
            }
        }
        d
    }

    pub fn quality(&self) -> QualityReport {
        mesh_quality(self)
    }

    /// Canonical JSON serialization (see [`load_mesh`]).
    pub fn to_json(&self) -> String {
        let file = MeshFile { nodes: self.nodes.clone(), tets: self.tets.clone() };
        serde_json::to_string(&file).expect("mesh serialization cannot fail")
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json().as_bytes())?;
        Ok(())
    }
}

/// Every face may be shared by at most two elements.
fn check_conforming(tets: &[[usize; 4]]) -> Result<()> {
    let mut faces: HashMap<[usize; 3], usize> = HashMap::with_capacity(tets.len() * 2);
    for (e, tet) in tets.iter().enumerate() {
        for skip in 0..4 {
            let mut f = [0usize; 3];
            let mut k = 0;
            for (a, &v) in tet.iter().enumerate() {
                if a != skip {
                    f[k] = v;
                    k += 1;
                }
            }
            f.sort_unstable();
            let count = faces.entry(f).or_insert(0);
            *count += 1;
            if *count > 2 {
                return Err(Error::BadElement {
                    element: e,
                    reason: format!("face {f:?} shared by more than two elements"),
                });
            }
        }
    }
    Ok(())
}

/// Kuhn subdivision of `[min, max]` into `6 n0 n1 n2` tetrahedra.
///
/// Nodes are numbered lexicographically with x fastest, then y, then z:
/// `idx = i + (n0+1) * (j + (n1+1) * k)`.
pub fn generate_structured_cube(bounds: Box3, n: [usize; 3]) -> Result<Mesh> {
    if n.iter().any(|&c| c == 0) {
        return Err(Error::InvalidParameter(format!("subdivision counts must be >= 1, got {n:?}")));
    }
    for d in 0..3 {
        let ext = bounds.max[d] - bounds.min[d];
        if ext.is_nan() || ext <= 0.0 {
            return Err(Error::InvalidParameter(format!("box has non-positive extent along axis {d}")));
        }
    }
    let [n0, n1, n2] = n;
    let idx = |i: usize, j: usize, k: usize| i + (n0 + 1) * (j + (n1 + 1) * k);
    let mut nodes = Vec::with_capacity((n0 + 1) * (n1 + 1) * (n2 + 1));
    for k in 0..=n2 {
        for j in 0..=n1 {
            for i in 0..=n0 {
                let t = [i as f64 / n0 as f64, j as f64 / n1 as f64, k as f64 / n2 as f64];
                let mut x = [0.0; 3];
                for d in 0..3 {
                    // endpoints exactly on the box
                    x[d] = if t[d] == 1.0 {
                        bounds.max[d]
                    } else {
                        bounds.min[d] + t[d] * (bounds.max[d] - bounds.min[d])
                    };
                }
                nodes.push(x);
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::with_capacity(6 * n0 * n1 * n2);
    for k in 0..n2 {
        for j in 0..n1 {
            for i in 0..n0 {
                for p in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = [idx(c[0], c[1], c[2]); 4];
                    for (s, &axis) in p.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = idx(c[0], c[1], c[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    Mesh::new_reoriented(nodes, tets)
}

pub fn mesh_quality(mesh: &Mesh) -> QualityReport {
    let vols = mesh.volumes();
    let h = vols.iter().map(|v| v.cbrt()).fold(f64::INFINITY, f64::min);
    let max_diam = (0..mesh.num_elements()).map(|e| mesh.diameter(e)).fold(0.0, f64::max);
    QualityReport {
        h,
        max_diam,
        c_mesh: max_diam / h,
        min_vol: vols.iter().copied().fold(f64::INFINITY, f64::min),
        max_vol: vols.iter().copied().fold(0.0, f64::max),
    }
}

/// Reads the JSON mesh format: `{"nodes": [[x,y,z], ...], "tets": [[i0,i1,i2,i3], ...]}`
/// with 0-based node indices.
pub fn load_mesh<R: Read>(mut source: R) -> Result<Mesh> {
    let mut buf = String::new();
    source.read_to_string(&mut buf)?;
    let file: MeshFile = serde_json::from_str(&buf)?;
    Mesh::new(file.nodes, file.tets)
}
