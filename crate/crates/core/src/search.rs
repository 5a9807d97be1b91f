//! One-dimensional golden-section minimization.

use crate::scalar::Real;

/// Result of a bracketed 1-D minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<T> {
    pub x: T,
    pub value: T,
    pub evaluations: usize,
}

/// Minimizes a unimodal `f` on `[lo, hi]` until the bracket is narrower than `tol`.
///
/// The returned point is the best evaluated abscissa, so `value` is always an
/// actual function value (never an interpolation).
pub fn golden_section<T: Real>(mut f: impl FnMut(T) -> T, lo: T, hi: T, tol: T) -> Minimum<T> {
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;
    let (mut best_x, mut best_f) = if fd < fc { (d, fd) } else { (c, fc) };

    // bounded by the bracket width; the cap guards against tol below ulp(b)
    for _ in 0..400 {
        if (b - a) <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
            evaluations += 1;
            if fc < best_f {
                best_x = c;
                best_f = fc;
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
            evaluations += 1;
            if fd < best_f {
                best_x = d;
                best_f = fd;
            }
        }
    }
    Minimum {
        x: best_x,
        value: best_f,
        evaluations,
    }
}
