//! Scalar abstraction shared by the exact evaluators.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the exact formulas are evaluated in: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts a count (group size, subset cardinality) into this scalar type.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `x * log_y` under the `0 * (-inf) = 0` convention, i.e. `y^x` in log space with `0^0 = 1`.
#[inline]
pub(crate) fn xlogy<T: Scalar>(x: T, log_y: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x * log_y
    }
}

/// `1 - (1 - p)^m` computed as `-expm1(m * log1p(-p))`.
#[inline]
pub(crate) fn one_minus_pow_complement<T: Scalar>(p: T, m: T) -> T {
    -(xlogy(m, (-p).ln_1p())).exp_m1()
}
