//! Dense complex linear algebra and the water-filling allocator.

mod decomp;
mod matrix;
mod water_filling;

pub use decomp::{
    condition_number, evd_hermitian, hermitian_inv_sqrt, hermitian_logdet, khatri_rao, svd, QrFactorization,
    SvdResult,
};
pub use matrix::{inner, kron_vec, norm_sqr, ComplexMatrix};
pub use water_filling::{allocation_rate, water_filling, PowerAllocation};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("{context}: expected shape {expected:?}, got {actual:?}")]
    DimensionMismatch {
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("{context}: matrix is not square ({rows}x{cols})")]
    NotSquare {
        context: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("{context}: matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { context: &'static str, deviation: f64 },
    #[error("{context}: eigenvalue {eigenvalue:e} below tolerance {threshold:e}")]
    Singular {
        context: &'static str,
        eigenvalue: f64,
        threshold: f64,
    },
    #[error("{context}: matrix is not positive definite")]
    NotPositiveDefinite { context: &'static str },
    #[error("{context}: column rank deficient (pivot {pivot:e} at column {column})")]
    RankDeficient {
        context: &'static str,
        column: usize,
        pivot: f64,
    },
    #[error("{context}: non-finite entry")]
    NonFinite { context: &'static str },
    #[error("water filling needs at least one positive singular value and positive SNR")]
    NoPositiveGain,
    #[error("{context}: empty matrix")]
    Empty { context: &'static str },
}
