//! Envelope (profile) Cholesky factorization of sparse SPD matrices.
//!
//! Rows are reordered with reverse Cuthill–McKee before factoring, which keeps
//! the envelope narrow for finite element matrices regardless of the input
//! node numbering. Fill is confined to the envelope, so the factor is exact
//! up to rounding.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// first stored column of each row of L (in permuted numbering)
    first: Vec<usize>,
    /// offset of row `i` in `values`; row `i` stores columns `first[i]..=i`
    offset: Vec<usize>,
    values: Vec<f64>,
}

/// Reverse Cuthill–McKee ordering of the symmetric pattern of `a`.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    let mut queue = VecDeque::new();
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a.row(v).0.iter().copied().filter(|&j| !visited[j]).collect();
            nbrs.sort_by_key(|&j| (degree[j], j));
            for j in nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

impl EnvelopeCholesky {
    /// Factors a symmetric positive definite matrix. Only the lower triangle
    /// (after reordering) is read.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
        }
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for &j in a.row(old).0 {
                let c = inv[j];
                if c < first[new] {
                    first[new] = c;
                }
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            let len = i - first[i] + 1;
            offset.push(offset[i] + len);
        }
        let mut values = vec![0.0; offset[n]];
        for (new, &old) in perm.iter().enumerate() {
            let (cols, vals) = a.row(old);
            for (&j, &v) in cols.iter().zip(vals) {
                let c = inv[j];
                if c <= new {
                    values[offset[new] + c - first[new]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let oi = offset[i];
            for j in fi..=i {
                let fj = first[j];
                let oj = offset[j];
                let kstart = fi.max(fj);
                let mut s = values[oi + j - fi];
                for k in kstart..j {
                    s -= values[oi + k - fi] * values[oj + k - fj];
                }
                if j < i {
                    values[oi + j - fi] = s / values[oj + j - fj];
                } else {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: perm[i], value: s });
                    }
                    values[oi + i - fi] = s.sqrt();
                }
            }
        }
        Ok(EnvelopeCholesky { n, perm, first, offset: offset[..n].to_vec(), values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x);
        x
    }

    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        assert_eq!(x.len(), n);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // L y = Pb
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offset[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.values[oi + k - fi] * y[k];
            }
            y[i] = s / self.values[oi + i - fi];
        }
        // L^T z = y, column-oriented sweep over the rows of L
        for i in (0..n).rev() {
            let fi = self.first[i];
            let oi = self.offset[i];
            y[i] /= self.values[oi + i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.values[oi + k - fi] * yi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
    }

    /// Solves `(A ⊗ I_d) x = b` for node-major interleaved vectors.
    pub fn solve_blocked_into(&self, d: usize, b: &[f64], x: &mut [f64]) {
        assert_eq!(b.len(), d * self.n);
        let mut rhs = vec![0.0; self.n];
        let mut sol = vec![0.0; self.n];
        for c in 0..d {
            for j in 0..self.n {
                rhs[j] = b[d * j + c];
            }
            self.solve_into(&rhs, &mut sol);
            for j in 0..self.n {
                x[d * j + c] = sol[j];
            }
        }
    }
}
