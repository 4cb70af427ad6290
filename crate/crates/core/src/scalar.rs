//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
///
/// Text formats and random generators work in `f64`; values cross into `T`
/// through [`Scalar::of`] and back through [`Scalar::as_f64`].
pub trait Scalar: Float + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static {
    fn of(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// A tolerance of `t`, floored at a small multiple of machine epsilon so
    /// that `f64`-calibrated thresholds stay meaningful in `f32`.
    fn tol(t: f64) -> Self {
        Self::of(t).max(Self::epsilon() * Self::of(16.0))
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

/// `‖a − b‖_∞` over two equal-length slices.
pub fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs()))
}

/// Product that treats `0 · ∞` as `0`, the convention for expectations over
/// events of probability zero.
#[inline]
pub(crate) fn weighted<T: Scalar>(prob: T, value: T) -> T {
    if prob == T::zero() {
        T::zero()
    } else {
        prob * value
    }
}
