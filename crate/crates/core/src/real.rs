//! Scalar abstraction for the closed-form parts of the crate.
//!
//! Score functions, p-value transforms and the theory constants are written
//! once against [`Real`] and instantiated for `f32` and `f64`. The streaming
//! engine and the Monte Carlo harness are `f64` only.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar usable by the score and p-value code.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Smallest p-value handed to a score. Below this the score is evaluated
    /// at the floor instead.
    fn p_floor() -> Self;

    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }
}

impl Real for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }

    #[inline]
    fn p_floor() -> Self {
        1e-300
    }
}

impl Real for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }

    #[inline]
    fn p_floor() -> Self {
        f32::MIN_POSITIVE
    }
}
