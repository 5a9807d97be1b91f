//! Minimal dense complex vector/matrix helpers.
//!
//! Everything here operates on short vectors (the AP antenna count) and
//! row-major `M x N` matrices, so plain loops over slices are enough.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type C<T> = Complex<T>;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "CMatrix::from_row_major",
                rows * cols,
                data.len(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
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
    pub fn get(&self, r: usize, c: usize) -> C<T> {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[C<T>] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

#[inline]
pub fn zero<T: Real>() -> C<T> {
    C::new(T::zero(), T::zero())
}

#[inline]
pub fn cis<T: Real>(theta: T) -> C<T> {
    let (s, c) = theta.sin_cos();
    C::new(c, s)
}

/// Hermitian inner product `a^H b`.
#[inline]
pub fn inner<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter()
        .zip(b)
        .fold(zero(), |acc, (x, y)| acc + x.conj() * y)
}

#[inline]
pub fn norm_sqr<T: Real>(a: &[C<T>]) -> T {
    a.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Real>(alpha: C<T>, x: &[C<T>], y: &mut [C<T>]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

pub fn scaled<T: Real>(alpha: C<T>, x: &[C<T>]) -> Vec<C<T>> {
    x.iter().map(|z| alpha * z).collect()
}

pub fn is_finite_vec<T: Real>(a: &[C<T>]) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
