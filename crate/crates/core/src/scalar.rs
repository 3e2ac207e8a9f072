//! Scalar abstraction for the numerical kernels.
//!
//! Mode algebra, the discriminator optics and the Maxwell-Bloch integrator
//! are written against [`Real`] so they run in `f32` or `f64`. Counting,
//! analysis and configuration work in `f64` only.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point type usable by the simulation kernels: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + rustfft::FftNum
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Never fails for finite inputs.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine-precision scale used for "exact" comparisons in tests and
    /// guards.
    fn tiny() -> Self;
}

impl Real for f32 {
    fn tiny() -> Self {
        1e-6
    }
}

impl Real for f64 {
    fn tiny() -> Self {
        1e-12
    }
}

pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn cis<T: Real>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), phase.sin())
}

#[inline]
pub(crate) fn idx<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("index representable")
}
