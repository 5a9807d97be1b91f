//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar the solvers are generic over.
///
/// Implemented for `f32` and `f64`. The associated constants carry the
/// precision-dependent defaults (fixed-point tolerance, rank test threshold).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Default relative tolerance for iterative solvers.
    const SOLVER_TOL: f64;
    /// Relative threshold below which a Gram determinant counts as singular.
    const RANK_TOL: f64;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const SOLVER_TOL: f64 = 1e-10;
    const RANK_TOL: f64 = 1e-12;
}

impl Real for f32 {
    const SOLVER_TOL: f64 = 1e-5;
    const RANK_TOL: f64 = 1e-6;
}

/// Canonicalizes an angle to `[0, 2π)`.
pub fn wrap_phase<T: Real>(theta: T) -> T {
    let two_pi = T::TAU();
    let mut r = theta % two_pi;
    if r < T::zero() {
        r = r + two_pi;
    }
    // `x % 2π + 2π` can round up to exactly 2π for tiny negative x
    if r >= two_pi {
        r = T::zero();
    }
    r
}
