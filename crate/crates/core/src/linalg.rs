//! Small dense linear algebra: row-major matrices, vector helpers, Cholesky,
//! power iteration and a Gram-Schmidt QR used by the instance generators.
//!
//! Problem sizes in this crate are tiny (n ≤ a few hundred), so everything is
//! written as plain loops over `Vec<T>`.

use std::ops::{Index, IndexMut};

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, T::one())
    }

    pub fn scaled_identity(n: usize, s: T) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Replaces `self` by `(self + selfᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let half = T::lit(0.5);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let s = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = s;
                self[(j, i)] = s;
            }
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x`
    pub fn tr_matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            axpy(xi, self.row(i), &mut out);
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `xᵀ self x`
    pub fn quad_form(&self, x: &[T]) -> T {
        dot(x, &self.matvec(x))
    }

    /// `self += s · other`
    pub fn add_scaled(&mut self, s: T, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + s * b;
        }
    }

    pub fn scale(&mut self, s: T) {
        for a in &mut self.data {
            *a = *a * s;
        }
    }

    /// Principal submatrix on the index set `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[(a, b)] = self[(i, j)];
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `y += a · x`
#[inline]
pub fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn scaled<T: Scalar>(s: T, a: &[T]) -> Vec<T> {
    a.iter().map(|&x| s * x).collect()
}

pub fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

pub fn max_abs<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factorizes a symmetric matrix; `None` if it is not numerically positive definite.
    pub fn new(a: &Matrix<T>) -> Option<Self> {
        assert!(a.is_square());
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag = diag - l[(j, k)] * l[(j, k)];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return None;
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Some(Self { l })
    }

    pub fn factor(&self) -> &Matrix<T> {
        &self.l
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[T]) -> Vec<T> {
        let n = self.l.rows();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &[T]) -> Vec<T> {
        let n = self.l.rows();
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s = s - self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.backward(&self.forward(b))
    }
}

/// Largest eigenvalue estimate of a symmetric PSD matrix by power iteration
/// (Rayleigh quotient after `iters` multiplications).
pub fn power_iteration<T: Scalar>(a: &Matrix<T>, iters: usize) -> T {
    let n = a.rows();
    if n == 0 {
        return T::zero();
    }
    // Deterministic, non-degenerate start vector.
    let mut v: Vec<T> = (0..n)
        .map(|i| T::one() + T::lit(0.1) * T::lit((i % 7) as f64))
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x = *x / nv);
    let mut rayleigh = T::zero();
    for _ in 0..iters {
        let w = a.matvec(&v);
        rayleigh = dot(&v, &w);
        let nw = norm(&w);
        if nw == T::zero() {
            return T::zero();
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    rayleigh.max(dot(&v, &a.matvec(&v)))
}

/// Smallest eigenvalue estimate of an SPD matrix by inverse iteration on its
/// Cholesky factor.
pub fn inverse_power_iteration<T: Scalar>(a: &Matrix<T>, chol: &Cholesky<T>, iters: usize) -> T {
    let n = a.rows();
    if n == 0 {
        return T::zero();
    }
    let mut v: Vec<T> = (0..n)
        .map(|i| T::one() + T::lit(0.1) * T::lit((i % 7) as f64))
        .collect();
    for _ in 0..iters {
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x = *x / nv);
        v = chol.solve(&v);
    }
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x = *x / nv);
    dot(&v, &a.matvec(&v))
}

/// Orthonormalizes the columns of a square matrix by modified Gram-Schmidt
/// (two passes) and flips column signs so that `R` has a positive diagonal.
pub fn orthonormal_columns<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    assert!(a.is_square());
    let n = a.rows();
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    for j in 0..n {
        let r_jj_sign = {
            // sign of the diagonal of R = projection of the raw column on the final q_j
            let raw = cols[j].clone();
            for _pass in 0..2 {
                for k in 0..j {
                    let (done, rest) = cols.split_at_mut(j);
                    let r = dot(&done[k], &rest[0]);
                    axpy(-r, &done[k], &mut rest[0]);
                }
            }
            let nrm = norm(&cols[j]);
            assert!(nrm > T::zero(), "rank-deficient matrix in QR");
            cols[j].iter_mut().for_each(|x| *x = *x / nrm);
            dot(&raw, &cols[j])
        };
        if r_jj_sign < T::zero() {
            cols[j].iter_mut().for_each(|x| *x = -*x);
        }
    }
    let mut q = Matrix::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            q[(i, j)] = c[i];
        }
    }
    q
}
