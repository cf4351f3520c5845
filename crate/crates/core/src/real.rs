//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point scalar the engine is generic over (`f32` or `f64`).
///
/// `LinalgScalar` lets the batched network code hit the gemm fast path.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Infallible for both supported widths.
    #[inline(always)]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Widens to `f64` without loss.
    #[inline(always)]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float widens to f64")
    }

    #[inline(always)]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable as float")
    }

    /// Width tag written into scene files.
    const BITS: u8;
}

impl Real for f32 {
    const BITS: u8 = 32;
}

impl Real for f64 {
    const BITS: u8 = 64;
}

#[inline(always)]
pub fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[inline(always)]
pub fn logit<T: Real>(p: T) -> T {
    (p / (T::one() - p)).ln()
}
