//! Compressed sparse row matrices with a fixed, sorted pattern.

use crate::geometry::Mesh;
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the vertex-adjacency pattern of `mesh` (diagonal
    /// included).
    pub fn mesh_pattern(mesh: &Mesh) -> Self {
        let n = mesh.vertex_count();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        row_ptr.push(0);
        for v in 0..n {
            let mut inserted = false;
            for &w in mesh.neighbors(v) {
                if !inserted && w > v {
                    col.push(v);
                    inserted = true;
                }
                col.push(w);
            }
            if !inserted {
                col.push(v);
            }
            row_ptr.push(col.len());
        }
        let nnz = col.len();
        CsrMatrix {
            n,
            row_ptr,
            col,
            val: vec![0.0; nnz],
        }
    }

    /// Builds a matrix from triplets; duplicates are summed in input order
    /// after a stable sort, so the result is deterministic.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::with_capacity(trip.len());
        let mut val: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            if last == Some((i, j)) {
                *val.last_mut().expect("nonempty") += v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, col, val }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix::diagonal_matrix(&vec![1.0; n])
    }

    pub fn diagonal_matrix(d: &[f64]) -> Self {
        CsrMatrix {
            n: d.len(),
            row_ptr: (0..=d.len()).collect(),
            col: (0..d.len()).collect(),
            val: d.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()].iter().copied().zip(self.val[r].iter().copied())
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }

    /// Adds `v` to entry `(i, j)`, which must be in the pattern.
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let k = self.position(i, j).expect("entry outside sparsity pattern");
        self.val[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.val[k])
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[i] = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.val[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    /// `alpha·self + beta·other` on the union pattern.
    pub fn linear_combination(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut col = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut val = Vec::with_capacity(col.capacity());
        row_ptr.push(0);
        for i in 0..self.n {
            let (mut a, ae) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let (mut b, be) = (other.row_ptr[i], other.row_ptr[i + 1]);
            while a < ae || b < be {
                let ca = if a < ae { self.col[a] } else { usize::MAX };
                let cb = if b < be { other.col[b] } else { usize::MAX };
                if ca == cb {
                    col.push(ca);
                    val.push(alpha * self.val[a] + beta * other.val[b]);
                    a += 1;
                    b += 1;
                } else if ca < cb {
                    col.push(ca);
                    val.push(alpha * self.val[a]);
                    a += 1;
                } else {
                    col.push(cb);
                    val.push(beta * other.val[b]);
                    b += 1;
                }
            }
            row_ptr.push(col.len());
        }
        CsrMatrix { n: self.n, row_ptr, col, val }
    }

    /// `self + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> CsrMatrix {
        self.linear_combination(1.0, &CsrMatrix::diagonal_matrix(d), 1.0)
    }

    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.val.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    /// Principal submatrix on the rows/columns with `index[i] = Some(k)`,
    /// renumbered to `k`.
    pub fn restrict(&self, index: &[Option<usize>], size: usize) -> CsrMatrix {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); size];
        for i in 0..self.n {
            let Some(ri) = index[i] else { continue };
            for (j, v) in self.row(i) {
                if let Some(cj) = index[j] {
                    rows[ri].push((cj, v));
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(size + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                col.push(c);
                val.push(v);
            }
            row_ptr.push(col.len());
        }
        CsrMatrix { n: size, row_ptr, col, val }
    }

    /// `max |A_ij − A_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.val.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Coordinate text export with a MatrixMarket header (1-based indices).
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "%%MatrixMarket matrix coordinate real general");
        let _ = writeln!(s, "{} {} {}", self.n, self.n, self.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                let _ = writeln!(s, "{} {} {:.17e}", i + 1, j + 1, v);
            }
        }
        s
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_are_merged() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 1, 1.0), (1, 0, 2.0), (0, 1, 0.5), (0, 0, 3.0)]);
        assert_eq!(m.get(0, 1), 1.5);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.mul(&[1.0, 1.0]), vec![4.5, 2.0]);
    }

    #[test]
    fn combination_and_restriction() {
        let a = CsrMatrix::from_triplets(3, vec![(0, 0, 1.0), (1, 2, 2.0), (2, 1, 2.0)]);
        let b = CsrMatrix::identity(3);
        let c = a.linear_combination(2.0, &b, -1.0);
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(1, 1), -1.0);
        assert_eq!(c.get(1, 2), 4.0);
        let r = c.restrict(&[None, Some(0), Some(1)], 2);
        assert_eq!(r.get(0, 1), 4.0);
        assert_eq!(r.symmetry_defect(), 0.0);
    }

    #[test]
    fn matrix_market_header() {
        let s = CsrMatrix::identity(2).to_matrix_market();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n"));
    }
}
