//! P1 finite element assembly.
//!
//! Scalar `N×N` matrices (mass, stiffness, weighted mass) are stored once and
//! act on 3N vectors as `A ⊗ I₃`. The cross-product matrix `S[m]` is the only
//! genuinely vector-valued operator; it is stored as three scalar moment
//! matrices `w_c(i,j) = ∫ m_c φ_i φ_j` from which every 3×3 block is derived.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::CsrMatrix;
use crate::vec3::{self, Mat3, Vec3};

pub use crate::field::NodalField3;

/// `∫_K λ₀^a λ₁^b λ₂^c λ₃^d dx / |K|`
pub fn barycentric_moment(exponents: [u32; 4]) -> f64 {
    fn fact(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }
    let s: u32 = exponents.iter().sum();
    6.0 * exponents.iter().map(|&e| fact(e)).product::<f64>() / fact(s + 3)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixRole {
    Mass,
    Stiffness,
    WeightedMass,
}

/// Symmetric scalar `N×N` matrix; acts on 3N vectors as `A ⊗ I₃`.
#[derive(Clone, Debug)]
pub struct ScalarMatrix {
    pub role: MatrixRole,
    pub matrix: CsrMatrix,
}

impl ScalarMatrix {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// `(A ⊗ I₃) x`
    pub fn apply3(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_blocked(3, x)
    }

    pub fn apply3_into(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.mul_blocked_into(3, x, y)
    }

    /// Explicit `A ⊗ I₃`.
    pub fn to_csr3(&self) -> CsrMatrix {
        self.matrix.kron_identity(3)
    }
}

/// `S[m]` with block `(i,j)` given by `(m × e_a, e_b φ_j)` integrated
/// against `φ_i`; rows of a block index the component of `φ_i`.
#[derive(Clone, Debug)]
pub struct CrossMatrix {
    w: [CsrMatrix; 3],
}

impl CrossMatrix {
    pub fn n(&self) -> usize {
        self.w[0].nrows()
    }

    /// Moment vector `∫ m φ_i φ_j`.
    pub fn moment(&self, i: usize, j: usize) -> Vec3 {
        [self.w[0].get(i, j), self.w[1].get(i, j), self.w[2].get(i, j)]
    }

    /// 3×3 block `(i, j)`: `block[a][b] = Σ_c ε_{cab} w_c`.
    pub fn block(&self, i: usize, j: usize) -> Mat3 {
        let w = self.moment(i, j);
        [[0.0, w[2], -w[1]], [-w[2], 0.0, w[0]], [w[1], -w[0], 0.0]]
    }

    /// `y = S x`, i.e. `y_i = Σ_j x_j × w_ij`.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        assert_eq!(x.len(), 3 * n);
        assert_eq!(y.len(), 3 * n);
        for i in 0..n {
            let (cols, w0) = self.w[0].row(i);
            let w1 = self.w[1].row(i).1;
            let w2 = self.w[2].row(i).1;
            let mut acc = [0.0; 3];
            for (k, &j) in cols.iter().enumerate() {
                let v = [x[3 * j], x[3 * j + 1], x[3 * j + 2]];
                let w = [w0[k], w1[k], w2[k]];
                acc[0] += v[1] * w[2] - v[2] * w[1];
                acc[1] += v[2] * w[0] - v[0] * w[2];
                acc[2] += v[0] * w[1] - v[1] * w[0];
            }
            y[3 * i..3 * i + 3].copy_from_slice(&acc);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.apply_into(x, &mut y);
        y
    }

    /// Explicit 3N×3N matrix; zero diagonal entries of each block are omitted.
    pub fn to_csr3(&self) -> CsrMatrix {
        let n = self.n();
        let mut t = Vec::new();
        for i in 0..n {
            for &j in self.w[0].row(i).0 {
                let b = self.block(i, j);
                for (a, row) in b.iter().enumerate() {
                    for (c, &v) in row.iter().enumerate() {
                        if a != c {
                            t.push((3 * i + a, 3 * j + c, v));
                        }
                    }
                }
            }
        }
        CsrMatrix::from_triplets(3 * n, 3 * n, &t)
    }
}

/// Operators of the 3N level: either `W ⊗ I₃` or a cross-product matrix.
#[derive(Clone, Debug)]
pub enum VectorMatrix3N {
    WeightedMass(ScalarMatrix),
    Cross(CrossMatrix),
}

impl VectorMatrix3N {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            VectorMatrix3N::WeightedMass(m) => m.apply3(x),
            VectorMatrix3N::Cross(s) => s.apply(x),
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        match self {
            VectorMatrix3N::WeightedMass(m) => m.to_csr3(),
            VectorMatrix3N::Cross(s) => s.to_csr3(),
        }
    }
}

/// Mesh plus precomputed constant barycentric gradients and the nodal
/// sparsity pattern.
#[derive(Clone, Debug)]
pub struct FemSpace {
    mesh: Mesh,
    grads: Vec<[Vec3; 4]>,
    pattern: CsrMatrix,
}

impl FemSpace {
    pub fn new(mesh: Mesh) -> Self {
        let grads = (0..mesh.num_elements()).map(|e| barycentric_gradients(&mesh.element_nodes(e))).collect();
        let mut rows = vec![Vec::new(); mesh.num_nodes()];
        for t in mesh.tets() {
            for &a in t {
                rows[a].extend_from_slice(t);
            }
        }
        let pattern = CsrMatrix::from_pattern(mesh.num_nodes(), rows);
        FemSpace { mesh, grads, pattern }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn gradients(&self, e: usize) -> &[Vec3; 4] {
        &self.grads[e]
    }

    pub fn mass(&self) -> ScalarMatrix {
        let ones = vec![1.0; self.mesh.num_elements()];
        ScalarMatrix { role: MatrixRole::Mass, matrix: self.weighted_scalar(&ones) }
    }

    pub fn stiffness(&self) -> ScalarMatrix {
        let mut a = self.pattern.clone();
        for (e, t) in self.mesh.tets().iter().enumerate() {
            let vol = self.mesh.volumes()[e];
            let g = &self.grads[e];
            for p in 0..4 {
                for q in 0..4 {
                    a.add_to(t[p], t[q], vol * vec3::dot(g[p], g[q]));
                }
            }
        }
        ScalarMatrix { role: MatrixRole::Stiffness, matrix: a }
    }

    /// Mass matrix with a per-element constant weight. Weights must be
    /// positive; a unit weight reproduces [`FemSpace::mass`] bit for bit.
    pub fn weighted_mass(&self, weights: &[f64]) -> Result<ScalarMatrix> {
        if weights.len() != self.mesh.num_elements() {
            return Err(Error::DimensionMismatch { expected: self.mesh.num_elements(), got: weights.len() });
        }
        if let Some((e, &w)) = weights.iter().enumerate().find(|(_, &w)| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("weighted mass: weight {w} on element {e} is not positive")));
        }
        Ok(ScalarMatrix { role: MatrixRole::WeightedMass, matrix: self.weighted_scalar(weights) })
    }

    fn weighted_scalar(&self, weights: &[f64]) -> CsrMatrix {
        let mut a = self.pattern.clone();
        for (e, t) in self.mesh.tets().iter().enumerate() {
            let base = weights[e] * self.mesh.volumes()[e] / 20.0;
            for p in 0..4 {
                for q in 0..4 {
                    a.add_to(t[p], t[q], if p == q { 2.0 * base } else { base });
                }
            }
        }
        a
    }

    pub fn cross(&self, m: &[Vec3]) -> Result<CrossMatrix> {
        if m.len() != self.num_nodes() {
            return Err(Error::DimensionMismatch { expected: self.num_nodes(), got: m.len() });
        }
        // coefficient of m_l in ∫ λ_l λ_p λ_q / |K|
        let mut coef = [[[0.0; 4]; 4]; 4];
        for (l, cl) in coef.iter_mut().enumerate() {
            for (p, cp) in cl.iter_mut().enumerate() {
                for (q, c) in cp.iter_mut().enumerate() {
                    let mut ex = [0u32; 4];
                    ex[l] += 1;
                    ex[p] += 1;
                    ex[q] += 1;
                    *c = barycentric_moment(ex);
                }
            }
        }
        let mut w = [self.pattern.clone(), self.pattern.clone(), self.pattern.clone()];
        for (e, t) in self.mesh.tets().iter().enumerate() {
            let vol = self.mesh.volumes()[e];
            for p in 0..4 {
                for q in 0..4 {
                    let mut acc = [0.0; 3];
                    for l in 0..4 {
                        acc = vec3::axpy(acc, coef[l][p][q], m[t[l]]);
                    }
                    for c in 0..3 {
                        w[c].add_to(t[p], t[q], vol * acc[c]);
                    }
                }
            }
        }
        Ok(CrossMatrix { w })
    }

    /// `b = −ℓ²(L ⊗ I₃) m + (M ⊗ I₃) lh`
    pub fn rhs(&self, mass: &ScalarMatrix, stiffness: &ScalarMatrix, m: &[Vec3], lh: &NodalField3, ell_ex2: f64) -> Vec<f64> {
        let mflat: Vec<f64> = m.iter().flat_map(|v| v.iter().copied()).collect();
        let lm = stiffness.apply3(&mflat);
        let ml = mass.apply3(&lh.to_flat());
        lm.iter().zip(&ml).map(|(a, b)| -ell_ex2 * a + b).collect()
    }

    /// Constant gradient of a P1 vector field on element `e`:
    /// `g[c][d] = ∂_d u_c`.
    pub fn element_gradient(&self, e: usize, u: &[Vec3]) -> Mat3 {
        let t = self.mesh.tets()[e];
        let g = &self.grads[e];
        let mut out = [[0.0; 3]; 3];
        for p in 0..4 {
            let v = u[t[p]];
            for c in 0..3 {
                for d in 0..3 {
                    out[c][d] += v[c] * g[p][d];
                }
            }
        }
        out
    }

    /// `|∇u|²` (Frobenius) on each element.
    pub fn gradient_norms_sq(&self, u: &[Vec3]) -> Vec<f64> {
        (0..self.mesh.num_elements())
            .map(|e| self.element_gradient(e, u).iter().flatten().map(|x| x * x).sum())
            .collect()
    }

    /// `max_K |∇u|_K|` (Frobenius).
    pub fn max_gradient_norm(&self, u: &[Vec3]) -> f64 {
        self.gradient_norms_sq(u).into_iter().fold(0.0, f64::max).sqrt()
    }

    /// `(ℓ²/2) ‖∇m‖²`
    pub fn exchange_energy(&self, ell_ex2: f64, m: &[Vec3]) -> f64 {
        let g = self.gradient_norms_sq(m);
        0.5 * ell_ex2 * g.iter().zip(self.mesh.volumes()).map(|(g, v)| g * v).sum::<f64>()
    }

    /// `(u, v)_{L²}` by an element loop (exact for P1 fields).
    pub fn l2_inner(&self, u: &[Vec3], v: &[Vec3]) -> f64 {
        let mut total = 0.0;
        for (e, t) in self.mesh.tets().iter().enumerate() {
            let mut s = 0.0;
            for p in 0..4 {
                for q in 0..4 {
                    let c = if p == q { 2.0 } else { 1.0 };
                    s += c * vec3::dot(u[t[p]], v[t[q]]);
                }
            }
            total += self.mesh.volumes()[e] * s / 20.0;
        }
        total
    }

    /// `(∇u, ∇v)_{L²}` by an element loop.
    pub fn h1_semi_inner(&self, u: &[Vec3], v: &[Vec3]) -> f64 {
        let mut total = 0.0;
        for e in 0..self.mesh.num_elements() {
            let gu = self.element_gradient(e, u);
            let gv = self.element_gradient(e, v);
            let s: f64 = gu.iter().flatten().zip(gv.iter().flatten()).map(|(a, b)| a * b).sum();
            total += self.mesh.volumes()[e] * s;
        }
        total
    }

    /// Average of nodal scalar values over each element (the integral mean of
    /// the P1 interpolant).
    pub fn element_means(&self, nodal: &[f64]) -> Vec<f64> {
        self.mesh.tets().iter().map(|t| t.iter().map(|&a| nodal[a]).sum::<f64>() / 4.0).collect()
    }
}

/// `∇λ₀..∇λ₃` for a tetrahedron with positive volume.
pub fn barycentric_gradients(x: &[Vec3; 4]) -> [Vec3; 4] {
    let j = vec3::from_columns(vec3::sub(x[1], x[0]), vec3::sub(x[2], x[0]), vec3::sub(x[3], x[0]));
    let inv = vec3::inverse(&j).expect("mesh elements are non-degenerate");
    let g1 = inv[0];
    let g2 = inv[1];
    let g3 = inv[2];
    let g0 = vec3::scale(-1.0, vec3::add(vec3::add(g1, g2), g3));
    [g0, g1, g2, g3]
}

pub fn assemble_mass(mesh: &Mesh) -> ScalarMatrix {
    FemSpace::new(mesh.clone()).mass()
}

pub fn assemble_stiffness(mesh: &Mesh) -> ScalarMatrix {
    FemSpace::new(mesh.clone()).stiffness()
}

pub fn assemble_weighted_mass(mesh: &Mesh, weights: &[f64]) -> Result<VectorMatrix3N> {
    FemSpace::new(mesh.clone()).weighted_mass(weights).map(VectorMatrix3N::WeightedMass)
}

pub fn assemble_cross(mesh: &Mesh, m: &[Vec3]) -> Result<VectorMatrix3N> {
    FemSpace::new(mesh.clone()).cross(m).map(VectorMatrix3N::Cross)
}

pub fn assemble_rhs(mesh: &Mesh, m: &[Vec3], lh: &NodalField3, ell_ex2: f64) -> Vec<f64> {
    let space = FemSpace::new(mesh.clone());
    space.rhs(&space.mass(), &space.stiffness(), m, lh, ell_ex2)
}

/// `A_k[m] = α M_k + β(k)k L − S[m]` and `b[m]`, kept in factored form.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub alpha: f64,
    pub beta_k: f64,
    pub mass: Arc<ScalarMatrix>,
    pub stiffness: Arc<ScalarMatrix>,
    pub weighted_mass: ScalarMatrix,
    pub cross: CrossMatrix,
    pub rhs: Vec<f64>,
}

impl AssembledSystem {
    pub fn n(&self) -> usize {
        self.mass.n()
    }

    /// `y = A_k x` on 3N vectors.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n3 = 3 * self.n();
        let mut tmp = vec![0.0; n3];
        self.weighted_mass.apply3_into(x, y);
        self.stiffness.apply3_into(x, &mut tmp);
        for (yi, ti) in y.iter_mut().zip(&tmp) {
            *yi = self.alpha * *yi + self.beta_k * ti;
        }
        self.cross.apply_into(x, &mut tmp);
        for (yi, ti) in y.iter_mut().zip(&tmp) {
            *yi -= ti;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.apply_into(x, &mut y);
        y
    }

    /// Explicit sparse `A_k`.
    pub fn to_csr(&self) -> CsrMatrix {
        let sym = CsrMatrix::linear_combination(self.alpha, &self.weighted_mass.matrix, self.beta_k, &self.stiffness.matrix).kron_identity(3);
        CsrMatrix::linear_combination(1.0, &sym, -1.0, &self.cross.to_csr3())
    }
}
