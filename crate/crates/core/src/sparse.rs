//! Compressed sparse row matrices and a sparse Cholesky factorization with a
//! coordinate nested-dissection ordering.

use crate::error::{Error, Result};
use crate::geometry::Point;

const NONE: usize = usize::MAX;

/// Square sparse matrix in CSR form, column indices sorted within rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate `(row, col, value)` entries.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> CsrMatrix {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// `xᵀ A y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>()).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// Exact (bitwise) symmetry check.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// Principal submatrix on `keep` (sorted old indices).
    pub fn principal_submatrix(&self, keep: &[usize]) -> CsrMatrix {
        let mut new_index = vec![NONE; self.n];
        for (k, &i) in keep.iter().enumerate() {
            new_index[i] = k;
        }
        let mut t = Vec::new();
        for (k, &i) in keep.iter().enumerate() {
            for (j, v) in self.row(i) {
                if new_index[j] != NONE {
                    t.push((k, new_index[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(keep.len(), t)
    }

    /// Selected rows of `A v`.
    pub fn rows_mul(&self, rows: &[usize], cols_values: &[f64]) -> Vec<f64> {
        rows.iter().map(|&i| self.row(i).map(|(j, v)| v * cols_values[j]).sum()).collect()
    }

    /// `A + s·D` for a diagonal `D`.
    pub fn add_diagonal(&self, d: &[f64], s: f64) -> CsrMatrix {
        let mut m = self.clone();
        for (i, di) in d.iter().enumerate() {
            let r = m.row_ptr[i]..m.row_ptr[i + 1];
            let k = m.col_idx[r.clone()].binary_search(&i).expect("structural diagonal");
            m.values[r.start + k] += s * di;
        }
        m
    }
}

/// Fill-reducing ordering by recursive coordinate bisection: each block is
/// split at the median of its longer extent and the left-side vertices
/// adjacent to the right side form the separator, numbered last.
pub fn nested_dissection(a: &CsrMatrix, points: &[Point]) -> Vec<usize> {
    let mut order = Vec::with_capacity(a.dim());
    let mut side = vec![0u8; a.dim()];
    dissect((0..a.dim()).collect(), a, points, &mut side, &mut order);
    order
}

fn dissect(mut nodes: Vec<usize>, a: &CsrMatrix, points: &[Point], side: &mut [u8], out: &mut Vec<usize>) {
    if nodes.len() <= 64 {
        out.extend(nodes);
        return;
    }
    let (mut lo, mut hi) = (Point::new(f64::MAX, f64::MAX), Point::new(f64::MIN, f64::MIN));
    for &v in &nodes {
        let p = points[v];
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let use_x = hi.x - lo.x >= hi.y - lo.y;
    let key = |v: usize| if use_x { points[v].x } else { points[v].y };
    nodes.sort_unstable_by(|&u, &v| key(u).total_cmp(&key(v)).then(u.cmp(&v)));
    let right = nodes.split_off(nodes.len() / 2);
    for &v in &right {
        side[v] = 2;
    }
    let (sep, rest): (Vec<usize>, Vec<usize>) =
        nodes.into_iter().partition(|&v| a.row(v).any(|(j, _)| side[j] == 2));
    for &v in &right {
        side[v] = 0;
    }
    dissect(rest, a, points, side, out);
    dissect(right, a, points, side, out);
    out.extend(sep);
}

/// `P A Pᵀ = L Lᵀ`, up-looking, column-compressed `L`.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseCholesky {
    /// Factors a symmetric positive definite matrix whose unknowns sit at `points`.
    pub fn factor(a: &CsrMatrix, points: &[Point]) -> Result<SparseCholesky> {
        let perm = nested_dissection(a, points);
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &CsrMatrix, perm: Vec<usize>) -> Result<SparseCholesky> {
        let n = a.dim();
        let mut pinv = vec![0; n];
        for (k, &old) in perm.iter().enumerate() {
            pinv[old] = k;
        }
        // upper triangle of P A Pᵀ by columns
        let mut cp = vec![0usize; n + 1];
        let mut ci = Vec::with_capacity(a.nnz() / 2 + n);
        let mut cx = Vec::with_capacity(a.nnz() / 2 + n);
        for k in 0..n {
            for (j, v) in a.row(perm[k]) {
                let i = pinv[j];
                if i <= k {
                    ci.push(i);
                    cx.push(v);
                }
            }
            cp[k + 1] = ci.len();
        }

        // elimination tree
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &i0 in &ci[cp[k]..cp[k + 1]] {
                let mut i = i0;
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
        }

        let mut stack = vec![0usize; n];
        let mut flag = vec![NONE; n];
        let ereach = |k: usize, stack: &mut [usize], flag: &mut [usize]| -> usize {
            let mut top = n;
            flag[k] = k;
            for &i0 in &ci[cp[k]..cp[k + 1]] {
                if i0 > k {
                    continue;
                }
                let mut i = i0;
                let mut len = 0;
                while flag[i] != k {
                    stack[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    stack[top] = stack[len];
                }
            }
            top
        };

        // column counts from the row patterns
        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(k, &mut stack, &mut flag);
            for &j in &stack[top..n] {
                counts[j] += 1;
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + counts[j];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut next: Vec<usize> = col_ptr[..n].to_vec();
        let mut x = vec![0.0; n];
        flag.iter_mut().for_each(|f| *f = NONE);

        for k in 0..n {
            let top = ereach(k, &mut stack, &mut flag);
            for p in cp[k]..cp[k + 1] {
                x[ci[p]] += cx[p];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..n] {
                let lki = x[i] / values[col_ptr[i]];
                x[i] = 0.0;
                for p in col_ptr[i] + 1..next[i] {
                    x[row_idx[p]] -= values[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                row_idx[p] = k;
                values[p] = lki;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: perm[k], value: d });
            }
            let p = next[k];
            next[k] += 1;
            row_idx[p] = k;
            values[p] = d.sqrt();
        }
        Ok(SparseCholesky { n, perm, col_ptr, row_idx, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for j in 0..self.n {
            let cp = self.col_ptr[j];
            y[j] /= self.values[cp];
            let yj = y[j];
            for p in cp + 1..self.col_ptr[j + 1] {
                y[self.row_idx[p]] -= self.values[p] * yj;
            }
        }
        for j in (0..self.n).rev() {
            let cp = self.col_ptr[j];
            let mut s = y[j];
            for p in cp + 1..self.col_ptr[j + 1] {
                s -= self.values[p] * y[self.row_idx[p]];
            }
            y[j] = s / self.values[cp];
        }
        let mut x = vec![0.0; self.n];
        for (k, &o) in self.perm.iter().enumerate() {
            x[o] = y[k];
        }
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// 5-point Laplacian on an `nx × ny` grid plus `shift·I`.
    fn grid(nx: usize, ny: usize, shift: f64) -> (CsrMatrix, Vec<Point>) {
        let id = |i: usize, j: usize| j * nx + i;
        let mut t = Vec::new();
        let mut pts = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                pts.push(Point::new(i as f64, j as f64));
                t.push((id(i, j), id(i, j), 4.0 + shift));
                if i + 1 < nx {
                    t.push((id(i, j), id(i + 1, j), -1.0));
                    t.push((id(i + 1, j), id(i, j), -1.0));
                }
                if j + 1 < ny {
                    t.push((id(i, j), id(i, j + 1), -1.0));
                    t.push((id(i, j + 1), id(i, j), -1.0));
                }
            }
        }
        (CsrMatrix::from_triplets(nx * ny, t), pts)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, 2.0)]);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 3);
        assert!(m.is_symmetric());
    }

    #[test]
    fn ordering_is_a_permutation() {
        let (a, pts) = grid(37, 23, 0.0);
        let mut p = nested_dissection(&a, &pts);
        p.sort_unstable();
        assert_eq!(p, (0..a.dim()).collect::<Vec<_>>());
    }

    #[test]
    fn cholesky_solves_grid_laplacian() {
        let (a, pts) = grid(60, 45, 0.0);
        let chol = SparseCholesky::factor(&a, &pts).unwrap();
        let x_true: Vec<f64> = (0..a.dim()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let b = a.mul_vec(&x_true);
        let x = chol.solve(&b);
        let err = x.iter().zip(&x_true).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        // nested dissection keeps fill far below dense
        assert!(chol.factor_nnz() < a.dim() * 120);
    }

    #[test]
    fn indefinite_matrix_reported() {
        let (a, pts) = grid(10, 10, -7.0);
        assert!(matches!(SparseCholesky::factor(&a, &pts), Err(Error::NotPositiveDefinite { .. })));
    }

    proptest! {
        #[test]
        fn solve_residual_small(nx in 2usize..30, ny in 2usize..30, shift in 0.01f64..3.0, seed in 0u64..1000) {
            let (a, pts) = grid(nx, ny, shift);
            let b: Vec<f64> = (0..a.dim()).map(|i| (((i as u64 + seed) * 2654435761) % 1000) as f64 / 500.0 - 1.0).collect();
            let x = SparseCholesky::factor(&a, &pts).unwrap().solve(&b);
            let r = a.mul_vec(&x);
            let res = r.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            prop_assert!(res < 1e-11);
        }
    }
}
