//! Compressed sparse row storage for the assembled finite element matrices.

use std::io::Write;

/// Square or rectangular CSR matrix with sorted column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given sparsity pattern. `pattern[i]` lists the
    /// columns of row `i`; duplicates are removed and columns sorted.
    pub fn from_pattern(ncols: usize, pattern: Vec<Vec<usize>>) -> Self {
        let nrows = pattern.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for mut row in pattern {
            row.sort_unstable();
            row.dedup();
            debug_assert!(row.last().map_or(true, |&c| c < ncols));
            indices.extend_from_slice(&row);
            indptr.push(indices.len());
        }
        let data = vec![0.0; indices.len()];
        CsrMatrix { nrows, ncols, indptr, indices, data }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed
    /// in input order, so identical input yields bit-identical output.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut pattern = vec![Vec::new(); nrows];
        for &(i, j, _) in triplets {
            pattern[i].push(j);
        }
        let mut m = Self::from_pattern(ncols, pattern);
        for &(i, j, v) in triplets {
            m.add_to(i, j, v);
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_pattern(n, (0..n).map(|i| vec![i]).collect());
        m.data.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    pub fn row_mut(&mut self, i: usize) -> (&[usize], &mut [f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &mut self.data[r])
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.indptr[i];
        self.indices[start..self.indptr[i + 1]].binary_search(&j).ok().map(|p| start + p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.data[p])
    }

    /// Adds `v` to entry `(i, j)`, which must be part of the pattern.
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        let p = self.position(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) not in sparsity pattern"));
        self.data[p] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Applies `A ⊗ I_d` to a node-major interleaved vector
    /// (`x[d*j + c]` is component `c` at node `j`).
    pub fn mul_blocked_into(&self, d: usize, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), d * self.ncols);
        assert_eq!(y.len(), d * self.nrows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for c in 0..d {
                y[d * i + c] = cols.iter().zip(vals).map(|(&j, &a)| a * x[d * j + c]).sum();
            }
        }
    }

    pub fn mul_blocked(&self, d: usize, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; d * self.nrows];
        self.mul_blocked_into(d, x, &mut y);
        y
    }

    /// `x . A y`
    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// `alpha * A + beta * B` for matrices sharing dimensions.
    pub fn linear_combination(alpha: f64, a: &CsrMatrix, beta: f64, b: &CsrMatrix) -> CsrMatrix {
        assert_eq!((a.nrows, a.ncols), (b.nrows, b.ncols));
        let pattern = (0..a.nrows)
            .map(|i| a.row(i).0.iter().chain(b.row(i).0).copied().collect())
            .collect();
        let mut m = CsrMatrix::from_pattern(a.ncols, pattern);
        for i in 0..a.nrows {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m.add_to(i, j, alpha * v);
            }
            let (cols, vals) = b.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m.add_to(i, j, beta * v);
            }
        }
        m
    }

    /// Explicit `A ⊗ I_d`.
    pub fn kron_identity(&self, d: usize) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.nnz() * d);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for c in 0..d {
                for (&j, &v) in cols.iter().zip(vals) {
                    triplets.push((d * i + c, d * j + c, v));
                }
            }
        }
        CsrMatrix::from_triplets(d * self.nrows, d * self.ncols, &triplets)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                triplets.push((j, i, v));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, &triplets)
    }

    /// Row-major dense copy; intended for small test problems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        out
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Coordinate-format dump: one `row col value` line per stored entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(w, "{i} {j} {v:e}")?;
            }
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
