//! Environment-aware hybrid beamforming with channel knowledge maps.
//!
//! Numerics, steering vectors, codebooks and the hybrid-beamforming core are
//! generic over [`Real`]; the geometry, map and training pipelines run in `f64`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod arrays;
pub mod baselines;
pub mod bim;
pub mod cam;
pub mod ckm;
pub mod codebooks;
pub mod design;
pub mod experiments;
pub mod hybrid;
pub mod numerics;
pub mod random;
pub mod scalar;

pub use scalar::Real;

pub type C64 = num_complex::Complex<f64>;
pub type C32 = num_complex::Complex<f32>;
pub type CMat = numerics::ComplexMatrix<f64>;
pub type CMat32 = numerics::ComplexMatrix<f32>;
