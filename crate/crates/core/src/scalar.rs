//! Scalar abstraction: every numeric routine in this crate is generic over a
//! floating-point type implementing [`Scalar`].
//!
//! The trait bundles the `num-traits` capabilities the solvers need (IEEE
//! float semantics, math constants, conversions from literals) with the
//! marker bounds required to share systems across threads. It is implemented
//! for `f32` and `f64`; the crate root exposes `f64` aliases for the common
//! types.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::float::FloatConst;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the crate.
///
/// Implemented for `f32` and `f64` via the blanket impl; any type with full
/// `num-traits` float support and thread-safe value semantics qualifies.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` literal or intermediate into `T`.
///
/// Panics if the value is not representable, which cannot happen for the
/// in-range constants this crate feeds it (conversion to `f32` rounds).
#[inline]
pub fn cast<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("constant not representable in scalar type")
}

/// Converts a `usize` (grid index, sample count) into `T`.
#[inline]
pub fn cast_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count not representable in scalar type")
}

/// Converts `T` to `f64` for diagnostics and error payloads.
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Error function, computed in `f64` and rounded to `T`.
#[inline]
pub fn erf<T: Scalar>(x: T) -> T {
    cast(libm::erf(to_f64(x)))
}

/// Complementary error function, computed in `f64` and rounded to `T`.
#[inline]
pub fn erfc<T: Scalar>(x: T) -> T {
    cast(libm::erfc(to_f64(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cast_round_trips_representable_values() {
        assert_eq!(cast::<f64>(1.5), 1.5);
        assert_eq!(cast::<f32>(1.5), 1.5_f32);
        assert_eq!(cast_usize::<f64>(7), 7.0);
    }

    #[test]
    fn erf_matches_known_values() {
        // erf(1) to 16 digits; erf is odd and saturates at +/-1.
        assert!((erf(1.0_f64) - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert_eq!(erf(0.0_f64), 0.0);
        assert!((erf(1.0_f64) + erf(-1.0_f64)).abs() < 1e-16);
        assert!((erf(10.0_f64) - 1.0).abs() < 1e-15);
        assert!((erfc(1.0_f64) - (1.0 - erf(1.0_f64))).abs() < 1e-15);
    }

    #[test]
    fn generic_over_f32() {
        let x: f32 = erf(1.0_f32);
        assert!((x - 0.842_700_8_f32).abs() < 1e-6);
    }
}
