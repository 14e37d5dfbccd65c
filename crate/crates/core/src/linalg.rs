//! Small dense linear algebra: a row-major matrix, the operator traits the
//! solver is written against, a cyclic Jacobi eigensolver for symmetric
//! matrices and an LU solve. Nothing here is tuned for large N; the solver
//! itself only ever needs matrix-vector products.

use std::cell::Cell;

use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    /// Builds a matrix from nested rows. Returns `None` when rows are ragged.
    pub fn from_rows(rows: &[Vec<T>]) -> Option<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return None;
        }
        let data = rows.iter().flat_map(|row| row.iter().copied()).collect();
        Some(Self { rows: r, cols: c, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum();
        }
    }

    pub fn mul_vec_transposed_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.rows);
        y.iter_mut().for_each(|v| *v = T::zero());
        for (i, &xi) in x.iter().enumerate() {
            for (yj, &a) in y.iter_mut().zip(self.row(i)) {
                *yj += a * xi;
            }
        }
    }

    /// Scales row `i` by `d[i]` and column `j` by `e[j]`: `D(d) A D(e)`.
    pub fn scale_rows_cols(&self, d: &[T], e: &[T]) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| d[i] * self[(i, j)] * e[j])
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| half * (self[(i, j)] + self[(j, i)]))
    }

    /// `‖A − Aᵀ‖∞`.
    pub fn asymmetry(&self) -> T {
        self.sub(&self.transpose()).norm_inf()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self[(i, j)] == T::zero()))
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// A square linear map applied matrix-free.
pub trait LinearOperator<T> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], out: &mut [T]);
}

impl<T: Scalar> LinearOperator<T> for Matrix<T> {
    fn dim(&self) -> usize {
        assert!(self.is_square());
        self.rows
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        self.mul_vec_into(x, out)
    }
}

/// Access to the normalized interference matrix `V`.
///
/// The fixed-point solver touches `V` only through `apply` (`Vx`) and
/// `apply_transpose` (`Vᵀx`), one of each per synchronous iteration.
/// `entry` is used for the O(N) column/row refreshes of asynchronous sweeps.
pub trait InterferenceOperator<T> {
    fn dim(&self) -> usize;
    fn entry(&self, i: usize, j: usize) -> T;
    fn apply(&self, x: &[T], out: &mut [T]);
    fn apply_transpose(&self, x: &[T], out: &mut [T]);
}

impl<T: Scalar> InterferenceOperator<T> for Matrix<T> {
    fn dim(&self) -> usize {
        self.rows
    }

    #[inline]
    fn entry(&self, i: usize, j: usize) -> T {
        self[(i, j)]
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        self.mul_vec_into(x, out)
    }

    fn apply_transpose(&self, x: &[T], out: &mut [T]) {
        self.mul_vec_transposed_into(x, out)
    }
}

/// Wraps an operator and counts matrix-vector products and entry reads.
#[derive(Debug)]
pub struct CountingOperator<M> {
    inner: M,
    applies: Cell<usize>,
    transposed: Cell<usize>,
    entries: Cell<usize>,
}

impl<M> CountingOperator<M> {
    pub fn new(inner: M) -> Self {
        Self { inner, applies: Cell::new(0), transposed: Cell::new(0), entries: Cell::new(0) }
    }

    /// `(V·x, Vᵀ·x, entry reads)` since construction or the last reset.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.applies.get(), self.transposed.get(), self.entries.get())
    }

    pub fn reset(&self) {
        self.applies.set(0);
        self.transposed.set(0);
        self.entries.set(0);
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<T, M: InterferenceOperator<T>> InterferenceOperator<T> for CountingOperator<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn entry(&self, i: usize, j: usize) -> T {
        self.entries.set(self.entries.get() + 1);
        self.inner.entry(i, j)
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        self.applies.set(self.applies.get() + 1);
        self.inner.apply(x, out)
    }

    fn apply_transpose(&self, x: &[T], out: &mut [T]) {
        self.transposed.set(self.transposed.get() + 1);
        self.inner.apply_transpose(x, out)
    }
}

/// Dense copy of any interference operator.
pub fn densify<T: Scalar, M: InterferenceOperator<T> + ?Sized>(m: &M) -> Matrix<T> {
    let n = m.dim();
    Matrix::from_fn(n, n, |i, j| m.entry(i, j))
}

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    /// Eigenvalues in descending order.
    pub values: Vec<T>,
    /// Column `k` of this matrix is the unit eigenvector for `values[k]`.
    pub vectors: Matrix<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    pub fn vector(&self, k: usize) -> Vec<T> {
        (0..self.vectors.rows()).map(|i| self.vectors[(i, k)]).collect()
    }

    pub fn max(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }

    pub fn min(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }

    pub fn spectral_radius(&self) -> T {
        self.max().abs().max(self.min().abs())
    }
}

/// Cyclic Jacobi eigenvalue iteration. The input is symmetrized first.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> SymmetricEigen<T> {
    assert!(a.is_square(), "eigen of non-square matrix");
    let n = a.rows();
    let mut m = a.symmetrized();
    let mut v = Matrix::identity(n);
    let eps = T::epsilon();

    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut scale = T::zero();
        for i in 0..n {
            for j in 0..n {
                let x = m[(i, j)] * m[(i, j)];
                if i == j {
                    scale += x;
                } else {
                    off += x;
                }
            }
        }
        if off <= eps * eps * (scale + off) || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let tau = (aqq - app) / (T::lit(2.0) * apq);
                let t = tau.signum() / (tau.abs() + (T::one() + tau * tau).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, k| v[(r, order[k])]);
    SymmetricEigen { values, vectors }
}

/// Solves `A x = b` by LU with partial pivoting. Returns `None` for a
/// numerically singular matrix.
pub fn lu_solve<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    let n = a.rows();
    assert!(a.is_square() && b.len() == n);
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.norm_inf().max(T::min_positive_value());
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().partial_cmp(&m[(j, col)].abs()).unwrap())
            .unwrap();
        if m[(piv, col)].abs() <= T::epsilon() * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                let tmp = m[(col, k)];
                m[(col, k)] = m[(piv, k)];
                m[(piv, k)] = tmp;
            }
            x.swap(col, piv);
        }
        for r in (col + 1)..n {
            let f = m[(r, col)] / m[(col, col)];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = m[(col, k)];
                m[(r, k)] -= f * v;
            }
            let xc = x[col];
            x[r] -= f * xc;
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for k in (r + 1)..n {
            s -= m[(r, k)] * x[k];
        }
        x[r] = s / m[(r, r)];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 1.0], vec![0.0, 1.0, 2.0]])
            .unwrap();
        let e = symmetric_eigen(&a);
        let s2 = 2f64.sqrt();
        assert_relative_eq!(e.values[0], 2.0 + s2, epsilon = 1e-12);
        assert_relative_eq!(e.values[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(e.values[2], 2.0 - s2, epsilon = 1e-12);
        // A v = λ v for every pair
        for k in 0..3 {
            let v = e.vector(k);
            let av = a.mul_vec(&v);
            for i in 0..3 {
                assert_relative_eq!(av[i], e.values[k] * v[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lu_solves_and_detects_singular() {
        let a = Matrix::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let x = lu_solve(&a, &[4.0, 5.0]).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-14);
        let s = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(lu_solve(&s, &[1.0, 1.0]).is_none());
    }

    #[test]
    fn transposed_product_matches_explicit_transpose() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let mut y = vec![0.0; 3];
        a.mul_vec_transposed_into(&[1.0, -1.0], &mut y);
        assert_eq!(y, a.transpose().mul_vec(&[1.0, -1.0]));
    }
}
