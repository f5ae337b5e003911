//! Real scalar abstraction shared by all matrix code.
//!
//! Everything numeric in the crate is written against [`Real`] so the same
//! decompositions run in `f32` or `f64`. Tolerances quoted in the docs of
//! other modules are the `f64` values; `f32` uses proportionally looser ones.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// floating point: f32 or f64
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Relative threshold below which an eigenvalue or pivot counts as zero.
    fn singular_tolerance() -> Self;

    /// Allowed deviation of `A - A^H` (Frobenius, relative to `max(1, |A|)`).
    fn hermitian_tolerance() -> Self;

    /// Lossless-ish conversion from an `f64` literal.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn singular_tolerance() -> Self {
        1e-12
    }
    fn hermitian_tolerance() -> Self {
        1e-12
    }
}

impl Real for f32 {
    fn singular_tolerance() -> Self {
        1e-5
    }
    fn hermitian_tolerance() -> Self {
        1e-5
    }
}

/// `exp(j * phase)`.
#[inline]
pub fn cis<T: Real>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), phase.sin())
}

#[inline]
pub fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub fn cone<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

#[inline]
pub fn creal<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}
