//! Seeding, circular Gaussian noise and pilot matrices.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::ComplexMatrix;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One splitmix64 step; a good mixer for deriving independent seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a stream identified by `parts` under `master`.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |acc, p| splitmix64(acc ^ splitmix64(*p)))
}

/// `CN(0, 1)`: real and imaginary parts each `N(0, 1/2)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex<f64> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix<f64> {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Unitary DFT matrix, entry `(r, c) = exp(-j 2 pi r c / n) / sqrt(n)`.
pub fn unitary_dft(n: usize) -> ComplexMatrix<f64> {
    let s = 1.0 / (n as f64).sqrt();
    ComplexMatrix::from_fn(n, n, |r, c| {
        let k = (r * c) % n;
        Complex::from_polar(s, -2.0 * std::f64::consts::PI * k as f64 / n as f64)
    })
}

/// Random constant-modulus vector of length `m` with entries `exp(j u) / sqrt(m)`.
pub fn random_phase_vector<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<Complex<f64>> {
    let s = 1.0 / (m as f64).sqrt();
    (0..m)
        .map(|_| Complex::from_polar(s, rng.random_range(0.0..2.0 * std::f64::consts::PI)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dft_is_unitary() {
        let s = unitary_dft(5);
        let g = &s * &s.adjoint();
        assert!((&g - &ComplexMatrix::identity(5)).frobenius_norm() < 1e-13);
    }

    #[test]
    fn seeds_differ() {
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_eq!(derive_seed(7, &[3]), derive_seed(7, &[3]));
    }
}
