#![allow(dead_code)]

use ckm_beamforming::numerics::ComplexMatrix;
use ckm_beamforming::random::{complex_gaussian, rng_from_seed, SimRng};
use ckm_beamforming::{CMat, C64};
use rand::Rng;

pub fn rng(seed: u64) -> SimRng {
    rng_from_seed(seed)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut SimRng) -> CMat {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

pub fn gaussian_vec(n: usize, rng: &mut SimRng) -> Vec<C64> {
    (0..n).map(|_| complex_gaussian(rng)).collect()
}

/// Random Hermitian positive definite matrix `G G^H + n I`.
pub fn random_hpd(n: usize, rng: &mut SimRng) -> CMat {
    let g = gaussian(n, n, rng);
    let mut a = g.matmul(&g.adjoint()).unwrap().hermitian_part();
    for i in 0..n {
        a[(i, i)] += c(n as f64 * 0.1, 0.0);
    }
    a
}

/// `||a - b||_F / max(||b||_F, tiny)`.
pub fn rel_err(a: &CMat, b: &CMat) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm().max(1e-300)
}

pub fn dist_to_identity(a: &CMat) -> f64 {
    (a - &ComplexMatrix::identity(a.rows())).frobenius_norm()
}

/// `k` distinct indices from `0..n`, sorted.
pub fn distinct_indices(n: usize, k: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        v.swap(i, j);
    }
    let mut out = v[..k].to_vec();
    out.sort_unstable();
    out
}

/// Naive triple-loop product, independent of the library matmul.
pub fn naive_mul(a: &CMat, b: &CMat) -> CMat {
    let mut out = ComplexMatrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = c(0.0, 0.0);
            for k in 0..a.cols() {
                s += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = s;
        }
    }
    out
}
