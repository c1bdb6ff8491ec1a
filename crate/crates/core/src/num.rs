//! Scalar abstraction shared by the geometry, analysis and engine modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable throughout the crate (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Lossy conversion to `f64`.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Geometric tolerance for self-intersection tests: 1e-7 m in double
    /// precision, widened to a few ulps of a room-scale coordinate in single.
    #[inline]
    fn ray_epsilon() -> Self {
        Self::lit(1e-7).max(Self::epsilon() * Self::lit(64.0))
    }

    /// Tolerance for unit-norm checks on direction vectors.
    #[inline]
    fn unit_tolerance() -> Self {
        Self::lit(1e-9).max(Self::epsilon() * Self::lit(16.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}
