//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating point scalar the library is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Conversion from a count.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance floor: tolerances asked of a scalar type never go below a
    /// small multiple of its machine epsilon.
    #[inline]
    fn tol_floor(requested: f64) -> Self {
        Self::lit(requested).max(Self::epsilon() * Self::lit(8.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `|x|^n · sign(x)`.
#[inline]
pub(crate) fn signed_powi<T: Real>(x: T, n: i32) -> T {
    let m = x.abs().powi(n);
    if x < T::zero() {
        -m
    } else {
        m
    }
}

/// Pairwise (cascade) summation in ascending index order.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().fold(T::zero(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Round half to even, returned as an unsigned count (negative input gives 0).
pub(crate) fn round_half_even(x: f64) -> usize {
    if !(x > 0.0) {
        return 0;
    }
    let fl = x.floor();
    let diff = x - fl;
    let up = diff > 0.5 || (diff == 0.5 && !(fl as u64).is_multiple_of(2));
    let r = if up { fl + 1.0 } else { fl };
    r as usize
}
