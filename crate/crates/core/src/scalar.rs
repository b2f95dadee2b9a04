//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the solvers are generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; panics only for values the type cannot hold.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal not representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("integer not representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `|s|^(e) * s`, i.e. the signed power `|s|^(e+1) sign(s)`, with `0^e * 0 = 0`.
#[inline]
pub fn signed_pow<T: Real>(s: T, e: T) -> T {
    if s == T::zero() {
        T::zero()
    } else {
        s.abs().powf(e) * s
    }
}

/// `|s|^e` with the convention `0^e = 0` for `e > 0` and `0^0 = 1`.
#[inline]
pub fn abs_pow<T: Real>(s: T, e: T) -> T {
    if e == T::zero() {
        T::one()
    } else if s == T::zero() {
        if e > T::zero() {
            T::zero()
        } else {
            T::infinity()
        }
    } else {
        s.abs().powf(e)
    }
}
