//! Dense complex matrices sized for space-time codewords (4×4, 8×8).
//!
//! Everything here is value-semantic: operations allocate their results and
//! never mutate shared state, so matrices can be shared freely across threads.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{DstmError, Result};
use crate::scalar::Real;

/// Row-major dense complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex::one();
        }
        m
    }

    /// Scalar multiple of the identity.
    pub fn scalar(n: usize, s: Complex<T>) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(DstmError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(DstmError::NonFinite("matrix entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex<T>>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(DstmError::Dimension("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    /// Builds a matrix from an entry generator `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
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

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(DstmError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.is_zero() {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · selfᴴ`.
    pub fn gram(&self) -> Self {
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        gram_into(&self.data, n, self.cols, &mut out.data);
        out
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(Complex::new(s, T::zero()))
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, other: &Self, s: T) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn trace(&self) -> Result<Complex<T>> {
        self.require_square("trace")?;
        Ok((0..self.rows).map(|i| self[(i, i)]).sum())
    }

    /// `Re tr(self · other)` without forming the product.
    pub fn re_trace_product(&self, other: &Self) -> Result<T> {
        if self.cols != other.rows || self.rows != other.cols {
            return Err(DstmError::Dimension(format!(
                "trace of {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut acc = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.data[i * self.cols + j];
                let b = other.data[j * other.cols + i];
                acc += a.re * b.re - a.im * b.im;
            }
        }
        Ok(acc)
    }

    pub fn frobenius_norm_sqr(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// Determinant by LU factorisation with partial pivoting.
    pub fn determinant(&self) -> Result<Complex<T>> {
        self.require_square("determinant")?;
        if self.rows == 0 {
            return Err(DstmError::Dimension("determinant of an empty matrix".into()));
        }
        let mut scratch = self.data.clone();
        Ok(lu_determinant(&mut scratch, self.rows))
    }

    /// Numerical rank: pivots of Gaussian elimination (partial pivoting) whose
    /// magnitude exceeds `tol` times the largest entry magnitude.
    pub fn rank(&self, tol: T) -> usize {
        let mut scratch = self.data.clone();
        elimination_rank(&mut scratch, self.rows, self.cols, tol)
    }

    /// `max |(m mᴴ − I)_ij|`.
    pub fn unitarity_defect(&self) -> Result<T> {
        self.require_square("unitarity defect")?;
        let g = self.gram();
        let n = self.rows;
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                let mut z = g[(i, j)];
                if i == j {
                    z -= T::one();
                }
                worst = worst.max(z.norm());
            }
        }
        Ok(worst)
    }

    /// Restores exact row orthonormality by modified Gram–Schmidt.
    pub fn reunitarize(&mut self) -> Result<()> {
        self.require_square("re-unitarization")?;
        let n = self.cols;
        for i in 0..self.rows {
            for j in 0..i {
                let mut proj = Complex::<T>::zero();
                for k in 0..n {
                    proj += self.data[i * n + k] * self.data[j * n + k].conj();
                }
                for k in 0..n {
                    let r = self.data[j * n + k];
                    self.data[i * n + k] -= proj * r;
                }
            }
            let norm = (0..n)
                .map(|k| self.data[i * n + k].norm_sqr())
                .sum::<T>()
                .sqrt();
            if norm <= T::epsilon() {
                return Err(DstmError::Dimension("rank-deficient matrix cannot be re-unitarized".into()));
            }
            for k in 0..n {
                self.data[i * n + k] /= norm;
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ComplexMatrix<U> {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|z| Complex::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64())))
                .collect(),
        }
    }

    fn require_square(&self, what: &str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(DstmError::Dimension(format!(
                "{what} needs a square matrix, got {}x{}",
                self.rows, self.cols
            )))
        }
    }
}

/// In-place LU determinant of an `n×n` row-major buffer.
pub(crate) fn lu_determinant<T: Real>(a: &mut [Complex<T>], n: usize) -> Complex<T> {
    let mut det = Complex::<T>::one();
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].norm_sqr();
        for i in k + 1..n {
            let v = a[i * n + k].norm_sqr();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best.is_zero() {
            return Complex::zero();
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            det = -det;
        }
        let pivot = a[k * n + k];
        det *= pivot;
        let inv = pivot.inv();
        for i in k + 1..n {
            let f = a[i * n + k] * inv;
            if f.is_zero() {
                continue;
            }
            for j in k + 1..n {
                let t = a[k * n + j];
                a[i * n + j] -= f * t;
            }
        }
    }
    det
}

pub(crate) fn elimination_rank<T: Real>(a: &mut [Complex<T>], rows: usize, cols: usize, tol: T) -> usize {
    elimination_rank_pivots(a, rows, cols, tol).0
}

/// Rank as in [`elimination_rank`], plus `|Π pivots|²`. For a square input
/// of full rank the elimination is an LU factorization with partial
/// pivoting, so the second value is `|det a|²`.
pub(crate) fn elimination_rank_pivots<T: Real>(a: &mut [Complex<T>], rows: usize, cols: usize, tol: T) -> (usize, T) {
    let mut pivots = T::one();
    let scale2 = a.iter().map(|z| z.norm_sqr()).fold(T::zero(), T::max);
    if scale2.is_zero() {
        return (0, T::zero());
    }
    let threshold2 = tol * tol * scale2;
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let mut p = rank;
        let mut best = a[rank * cols + col].norm_sqr();
        for i in rank + 1..rows {
            let v = a[i * cols + col].norm_sqr();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= threshold2 {
            continue;
        }
        pivots *= best;
        if p != rank {
            for j in 0..cols {
                a.swap(rank * cols + j, p * cols + j);
            }
        }
        let inv = a[rank * cols + col].inv();
        for i in rank + 1..rows {
            let f = a[i * cols + col] * inv;
            if f.is_zero() {
                continue;
            }
            for j in col..cols {
                let t = a[rank * cols + j];
                a[i * cols + j] -= f * t;
            }
        }
        rank += 1;
    }
    (rank, pivots)
}

/// `out = m · mᴴ` for an `n×cols` row-major buffer.
pub(crate) fn gram_into<T: Real>(m: &[Complex<T>], n: usize, cols: usize, out: &mut [Complex<T>]) {
    for i in 0..n {
        for j in i..n {
            let mut acc = Complex::<T>::zero();
            for k in 0..cols {
                acc += m[i * cols + k] * m[j * cols + k].conj();
            }
            out[i * n + j] = acc;
            out[j * n + i] = acc.conj();
        }
    }
}

impl<T> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;

    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Add for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn add(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<T: Real> Sub for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn sub(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in sub");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Panics on a shape mismatch; use [`ComplexMatrix::matmul`] for a checked product.
impl<T: Real> Mul for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn mul(self, rhs: Self) -> ComplexMatrix<T> {
        self.matmul(rhs).expect("shape mismatch in mul")
    }
}

impl<T: Real> Neg for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn neg(self) -> ComplexMatrix<T> {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| -z).collect(),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for ComplexMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = &self.data[i * self.cols + j];
                write!(f, "{:+.4?}{:+.4?}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}
