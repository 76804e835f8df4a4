//! Dense LU factorization with partial pivoting over real or complex scalars.
//!
//! The systems assembled here are small (tens of unknowns), so a dense
//! row-major matrix is the whole story.

use num_complex::Complex64;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn magnitude(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.n + col]
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: T) {
        let idx = row * self.n + col;
        self.data[idx] = self.data[idx] + value;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|r| {
                let row = &self.data[r * self.n..(r + 1) * self.n];
                row.iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|r| (0..r).all(|c| (self.get(r, c) - self.get(c, r)).magnitude() <= tol))
    }
}

/// Raised when elimination meets a pivot that is numerically zero.
/// `index` is the unknown (column) that could not be pivoted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularPivot {
    pub index: usize,
}

/// Solves `a * x = b`, consuming both. Returns `x`.
pub fn solve<T: Scalar>(mut a: DenseMatrix<T>, mut b: Vec<T>) -> Result<Vec<T>, SingularPivot> {
    let n = a.n;
    assert_eq!(b.len(), n, "right-hand side length mismatch");
    let scale = a.data.iter().map(|v| v.magnitude()).fold(0.0_f64, f64::max);
    let threshold = scale * 1e-22;

    // Row permutation is applied eagerly, so `perm` only records which
    // original column each pivot belongs to for error reporting.
    for k in 0..n {
        let (mut pivot_row, mut pivot_mag) = (k, a.get(k, k).magnitude());
        for r in (k + 1)..n {
            let m = a.get(r, k).magnitude();
            if m > pivot_mag {
                pivot_row = r;
                pivot_mag = m;
            }
        }
        if !(pivot_mag > threshold) || !pivot_mag.is_finite() {
            return Err(SingularPivot { index: k });
        }
        if pivot_row != k {
            for c in 0..n {
                a.data.swap(k * n + c, pivot_row * n + c);
            }
            b.swap(k, pivot_row);
        }
        let pivot = a.get(k, k);
        for r in (k + 1)..n {
            let factor = a.get(r, k) / pivot;
            if factor == T::zero() {
                continue;
            }
            a.data[r * n + k] = T::zero();
            for c in (k + 1)..n {
                let v = a.get(k, c);
                a.data[r * n + c] = a.data[r * n + c] - factor * v;
            }
            b[r] = b[r] - factor * b[k];
        }
    }

    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        for c in (k + 1)..n {
            acc = acc - a.get(k, c) * x[c];
        }
        x[k] = acc / a.get(k, k);
    }
    Ok(x)
}
