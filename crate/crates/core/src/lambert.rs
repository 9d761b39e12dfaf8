//! Lower branch `W_{-1}` of the Lambert W function on `[-1/e, 0)`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_HALLEY_STEPS: usize = 50;
const MAX_BISECTION_STEPS: usize = 400;

/// Solves `w·e^w = x` for `w <= -1`.
///
/// Starts from the branch-point series near `-1/e` and from
/// `ln(-x) - ln(-ln(-x))` elsewhere, refines with Halley steps and falls back
/// to bisection if Halley has not settled within 50 steps.
pub fn lambert_w_minus1<T: Scalar>(x: T) -> Result<T> {
    let branch = -T::one() / T::E();
    if !(x >= branch && x < T::zero()) {
        return Err(Error::Domain(format!(
            "W_-1 is defined on [-1/e, 0), got {x}"
        )));
    }
    // Distance to the branch point, 1 + e·x, clamped against rounding in e·x.
    let gap = (T::one() + T::E() * x).max(T::zero());
    if gap <= T::epsilon() {
        return Ok(-T::one());
    }

    let w0 = if gap < T::lit(0.25) {
        let p = -(T::lit(2.0) * gap).sqrt();
        -T::one() + p - p * p / T::lit(3.0) + T::lit(11.0 / 72.0) * p * p * p
    } else {
        let l1 = (-x).ln();
        l1 - (-l1).ln()
    };

    halley(x, w0).map_or_else(|| Ok(bisect(x)), Ok)
}

fn halley<T: Scalar>(x: T, mut w: T) -> Option<T> {
    let two = T::lit(2.0);
    let tol = T::lit(4.0) * T::epsilon();
    for _ in 0..MAX_HALLEY_STEPS {
        if w >= -T::one() {
            return None;
        }
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + T::one();
        let denom = ew * wp1 - (w + two) * f / (two * wp1);
        let step = f / denom;
        let next = w - step;
        if !next.is_finite() {
            return None;
        }
        if (next - w).abs() <= tol * next.abs() {
            return (next <= -T::one()).then_some(next);
        }
        w = next;
    }
    None
}

/// `w·e^w` is decreasing on `(-inf, -1]`; bracket and halve.
fn bisect<T: Scalar>(x: T) -> T {
    let mut hi = -T::one();
    let mut lo = -T::lit(2.0);
    while lo * lo.exp() < x {
        hi = lo;
        lo = lo * T::lit(2.0);
    }
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = (lo + hi) / T::lit(2.0);
        if mid == lo || mid == hi {
            break;
        }
        if mid * mid.exp() < x {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo + hi) / T::lit(2.0)
}
