//! Sparse superoperators on column-stacked density matrices: vec(ρ)[a + d·b] = ρ[a, b].
//!
//! A [`SuperOp`] is kept symbolically as Σ_k A_k ρ B_k and only expanded into a
//! [`SparseMatrix`] on demand, row by row.

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::operators::ZERO;

pub fn vec_index(a: usize, b: usize, dim: usize) -> usize {
    a + dim * b
}

pub fn vectorize(rho: &Mat<C64>) -> Vec<C64> {
    let d = rho.nrows();
    (0..d * d).map(|k| rho[(k % d, k / d)]).collect()
}

pub fn unvectorize(v: &[C64], dim: usize) -> Mat<C64> {
    Mat::from_fn(dim, dim, |a, b| v[vec_index(a, b, dim)])
}

/// Sparse d×d operator with both row and column access.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
    cols: Vec<Vec<(usize, C64)>>,
}

impl SparseOp {
    pub fn from_dense(m: &Mat<C64>) -> Self {
        let dim = m.nrows();
        let mut rows = vec![Vec::new(); dim];
        let mut cols = vec![Vec::new(); dim];
        for b in 0..dim {
            for a in 0..dim {
                let v = m[(a, b)];
                if v != ZERO {
                    rows[a].push((b, v));
                    cols[b].push((a, v));
                }
            }
        }
        SparseOp { dim, rows, cols }
    }

    pub fn identity(dim: usize) -> Self {
        let unit = |i| vec![(i, C64::new(1.0, 0.0))];
        SparseOp { dim, rows: (0..dim).map(unit).collect(), cols: (0..dim).map(unit).collect() }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.nnz() == 0
    }
}

/// Σ_k c_k A_k ρ B_k + G ρ + ρ F.
#[derive(Debug, Clone)]
pub struct SuperOp {
    dim: usize,
    sandwiches: Vec<(SparseOp, SparseOp, C64)>,
    left: Mat<C64>,
    right: Mat<C64>,
}

impl SuperOp {
    pub fn zero(dim: usize) -> Self {
        SuperOp { dim, sandwiches: Vec::new(), left: Mat::zeros(dim, dim), right: Mat::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// ρ ↦ c·A ρ B.
    pub fn add_sandwich(&mut self, a: &Mat<C64>, b: &Mat<C64>, c: C64) {
        let (sa, sb) = (SparseOp::from_dense(a), SparseOp::from_dense(b));
        if !sa.is_zero() && !sb.is_zero() && c != ZERO {
            self.sandwiches.push((sa, sb, c));
        }
    }

    /// ρ ↦ c·G ρ.
    pub fn add_left(&mut self, g: &Mat<C64>, c: C64) {
        self.left += Mat::from_fn(self.dim, self.dim, |i, j| c * g[(i, j)]);
    }

    /// ρ ↦ c·ρ F.
    pub fn add_right(&mut self, f: &Mat<C64>, c: C64) {
        self.right += Mat::from_fn(self.dim, self.dim, |i, j| c * f[(i, j)]);
    }

    /// γ·(L ρ L† − ½{L†L, ρ}).
    pub fn add_lindblad(&mut self, l: &Mat<C64>, gamma: f64) {
        if gamma == 0.0 {
            return;
        }
        let ldl = l.adjoint() * l;
        self.add_sandwich(l, &l.adjoint().to_owned(), C64::new(gamma, 0.0));
        self.add_left(&ldl, C64::new(-0.5 * gamma, 0.0));
        self.add_right(&ldl, C64::new(-0.5 * gamma, 0.0));
    }

    pub fn extend(&mut self, other: &SuperOp, scale: f64) {
        assert_eq!(self.dim, other.dim, "superoperator dimension mismatch");
        let s = C64::new(scale, 0.0);
        for (a, b, c) in &other.sandwiches {
            self.sandwiches.push((a.clone(), b.clone(), c * s));
        }
        self.left += Mat::from_fn(self.dim, self.dim, |i, j| s * other.left[(i, j)]);
        self.right += Mat::from_fn(self.dim, self.dim, |i, j| s * other.right[(i, j)]);
    }

    pub fn apply(&self, rho: &Mat<C64>) -> Mat<C64> {
        let mut out = &self.left * rho + rho * &self.right;
        for (a, b, c) in &self.sandwiches {
            let mut tmp = Mat::<C64>::zeros(self.dim, self.dim);
            for (i, row) in a.rows.iter().enumerate() {
                for &(k, av) in row {
                    for j in 0..self.dim {
                        tmp[(i, j)] += av * rho[(k, j)];
                    }
                }
            }
            for (j, col) in b.cols.iter().enumerate() {
                for &(k, bv) in col {
                    for i in 0..self.dim {
                        out[(i, j)] += c * tmp[(i, k)] * bv;
                    }
                }
            }
        }
        out
    }

    /// Expands into a sparse matrix over the d² column-stacked indices. Rows for which
    /// `keep_row` is false are left empty.
    pub fn to_sparse(&self, keep_row: impl Fn(usize, usize) -> bool) -> SparseMatrix {
        let d = self.dim;
        let n = d * d;
        let left = SparseOp::from_dense(&self.left);
        let right = SparseOp::from_dense(&self.right);
        let mut scratch = vec![ZERO; n];
        let mut marked = vec![false; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in 0..n {
            let (a, b) = (row % d, row / d);
            if keep_row(a, b) {
                let mut add = |col: usize, v: C64| {
                    if !marked[col] {
                        marked[col] = true;
                        touched.push(col);
                    }
                    scratch[col] += v;
                };
                for &(c, v) in &left.rows[a] {
                    add(vec_index(c, b, d), v);
                }
                for &(e, v) in &right.cols[b] {
                    add(vec_index(a, e, d), v);
                }
                for (sa, sb, coef) in &self.sandwiches {
                    for &(c, av) in &sa.rows[a] {
                        let ac = coef * av;
                        for &(e, bv) in &sb.cols[b] {
                            add(vec_index(c, e, d), ac * bv);
                        }
                    }
                }
                touched.sort_unstable();
                for &col in &touched {
                    if scratch[col] != ZERO {
                        col_idx.push(col);
                        vals.push(scratch[col]);
                    }
                    scratch[col] = ZERO;
                    marked[col] = false;
                }
                touched.clear();
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix { n, row_ptr, col_idx, vals }
    }

    pub fn to_sparse_full(&self) -> SparseMatrix {
        self.to_sparse(|_, _| true)
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<C64>,
}

impl SparseMatrix {
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.vals.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// self + s·other.
    pub fn add_scaled(&self, other: &SparseMatrix, s: f64) -> SparseMatrix {
        assert_eq!(self.n, other.n, "sparse dimension mismatch");
        let s = C64::new(s, 0.0);
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut col_idx = Vec::with_capacity(self.nnz() + other.nnz());
        let mut vals = Vec::with_capacity(self.nnz() + other.nnz());
        row_ptr.push(0);
        for r in 0..self.n {
            let mut x = self.row(r).peekable();
            let mut y = other.row(r).map(|(c, v)| (c, s * v)).peekable();
            loop {
                let next = match (x.peek(), y.peek()) {
                    (Some(&(cx, vx)), Some(&(cy, vy))) => {
                        if cx == cy {
                            x.next();
                            y.next();
                            (cx, vx + vy)
                        } else if cx < cy {
                            x.next();
                            (cx, vx)
                        } else {
                            y.next();
                            (cy, vy)
                        }
                    }
                    (Some(&e), None) => {
                        x.next();
                        e
                    }
                    (None, Some(&e)) => {
                        y.next();
                        e
                    }
                    (None, None) => break,
                };
                col_idx.push(next.0);
                vals.push(next.1);
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix { n: self.n, row_ptr, col_idx, vals }
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// max over columns of |Σ_a M[(a,a), col]|: zero for trace-preserving maps.
    pub fn trace_leak(&self, dim: usize) -> f64 {
        let mut sums = vec![ZERO; self.n];
        for a in 0..dim {
            for (c, v) in self.row(vec_index(a, a, dim)) {
                sums[c] += v;
            }
        }
        sums.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}
