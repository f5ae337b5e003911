mod common;

use ckm_beamforming::arrays::UpaGeometry;
use ckm_beamforming::codebooks::{enumerate_selections, Codebook};
use ckm_beamforming::hybrid::{
    achieved_rate, algorithm1, algorithm1_selection, effective_channel, effective_rate, equal_power_covariance,
    optimal_baseband, pre_log, rate, HybridError, SystemDims, DEFAULT_SEARCH_BUDGET,
};
use ckm_beamforming::numerics::{evd_hermitian, hermitian_inv_sqrt, svd, ComplexMatrix};
use ckm_beamforming::random::random_phase_vector;
use ckm_beamforming::CMat;
use common::*;
use proptest::prelude::*;

fn random_codebook(geom: UpaGeometry, count: usize, g: &mut ckm_beamforming::random::SimRng) -> Codebook<f64> {
    let m = geom.elements();
    let beams = (0..count)
        .map(|_| random_phase_vector(m, g).into_iter().map(|x| x / (m as f64).sqrt()).collect())
        .collect();
    Codebook::from_beams(geom, beams).unwrap()
}

/// Orthonormal columns from the first `k` left singular vectors of a Gaussian matrix.
fn orthonormal(rows: usize, k: usize, g: &mut ckm_beamforming::random::SimRng) -> CMat {
    svd(&gaussian(rows, k, g)).unwrap().u.leading_columns(k)
}

#[test]
fn effective_channel_orthonormal_combiner() {
    let mut g = rng(1);
    let h = gaussian(6, 8, &mut g);
    let f = gaussian(8, 3, &mut g);
    let w = orthonormal(6, 2, &mut g);
    let he = effective_channel(&h, &f, &w).unwrap();
    let expected = naive_mul(&naive_mul(&w.adjoint(), &h), &f);
    assert!(rel_err(&he, &expected) < 1e-12);
}

#[test]
fn effective_channel_rescaled_combiner_invariant() {
    // Whitening removes any invertible mixing of the combiner columns.
    let mut g = rng(2);
    let h = gaussian(6, 8, &mut g);
    let f = gaussian(8, 3, &mut g);
    let w = gaussian(6, 2, &mut g);
    let mix = random_hpd(2, &mut g);
    let a = effective_channel(&h, &f, &w).unwrap();
    let b = effective_channel(&h, &f, &w.matmul(&mix).unwrap()).unwrap();
    // Equal up to a unitary on the left, so the Gram matrices agree.
    let ga = a.adjoint().matmul(&a).unwrap();
    let gb = b.adjoint().matmul(&b).unwrap();
    assert!(rel_err(&ga, &gb) < 1e-10);
}

#[test]
fn rate_matches_eigenvalue_sum() {
    let mut g = rng(3);
    let he = gaussian(3, 4, &mut g);
    let rx: CMat = equal_power_covariance(4);
    let snr = 5.0;
    let (vals, _) = evd_hermitian(&he.matmul(&he.adjoint()).unwrap().hermitian_part()).unwrap();
    let oracle: f64 = vals.iter().map(|l| (1.0 + snr * l / 4.0).log2()).sum();
    assert!((rate(&he, &rx, snr).unwrap() - oracle).abs() < 1e-10);
}

#[test]
fn rate_rejects_indefinite_covariance() {
    let he = ComplexMatrix::<f64>::identity(2);
    let bad = ComplexMatrix::real_diagonal(&[1.0, -0.5]);
    assert!(matches!(rate(&he, &bad, 1.0), Err(HybridError::NotPsd(_))));
}

#[test]
fn single_stream_rate_uses_top_singular_value() {
    let mut g = rng(4);
    let h = gaussian(4, 8, &mut g);
    let f_rf = gaussian(8, 2, &mut g);
    let w_rf = gaussian(4, 1, &mut g);
    let snr = 3.0;
    let (bf, r) = optimal_baseband(&h, &f_rf, &w_rf, snr).unwrap();
    let fw = hermitian_inv_sqrt(&f_rf.gram()).unwrap();
    let ww = hermitian_inv_sqrt(&w_rf.gram()).unwrap();
    let ht = naive_mul(&naive_mul(&naive_mul(&ww, &w_rf.adjoint()), &h), &naive_mul(&f_rf, &fw));
    let s = svd(&ht).unwrap().singular_values[0];
    assert!((r - (1.0 + snr * s * s).log2()).abs() < 1e-10);
    assert!((achieved_rate(&h, &bf, snr).unwrap() - r).abs() < 1e-9);
}

#[test]
fn zero_channel_gives_zero_rate() {
    let mut g = rng(5);
    let h = ComplexMatrix::<f64>::zeros(4, 8);
    let (bf, r) = optimal_baseband(&h, &gaussian(8, 3, &mut g), &gaussian(4, 2, &mut g), 10.0).unwrap();
    assert_eq!(r, 0.0);
    assert!((bf.transmit_power() - 1.0).abs() < 1e-10);
    assert!(achieved_rate(&h, &bf, 10.0).unwrap().abs() < 1e-12);
}

#[test]
fn optimal_baseband_dominates_random_covariances() {
    let mut g = rng(6);
    let h = gaussian(4, 8, &mut g);
    let f_rf = gaussian(8, 3, &mut g);
    let w_rf = gaussian(4, 2, &mut g);
    let snr = 2.0;
    let (_, best) = optimal_baseband(&h, &f_rf, &w_rf, snr).unwrap();
    let he = effective_channel(&h, &f_rf, &w_rf).unwrap();
    for _ in 0..1000 {
        let x = gaussian(3, 2, &mut g);
        let rx = x.matmul(&x.adjoint()).unwrap().hermitian_part();
        let power = f_rf.matmul(&rx).unwrap().matmul(&f_rf.adjoint()).unwrap().trace().re;
        let rx = rx.scale_real(1.0 / power);
        assert!(rate(&he, &rx, snr).unwrap() <= best + 1e-9);
    }
}

#[test]
fn algorithm1_forced_selection() {
    let mut g = rng(7);
    let f = random_codebook(UpaGeometry::new(2, 2), 3, &mut g);
    let w = random_codebook(UpaGeometry::new(1, 3), 2, &mut g);
    let dims = SystemDims::new(4, 3, 3, 2, 100, 10.0).unwrap();
    let h = gaussian(3, 4, &mut g);
    let (tx, rx, r) = algorithm1_selection(&h, &f, &w, &dims, DEFAULT_SEARCH_BUDGET).unwrap();
    assert_eq!((tx, rx), (vec![0, 1, 2], vec![0, 1]));
    let (_, direct) = optimal_baseband(&h, &f.matrix(&[0, 1, 2]).unwrap(), &w.matrix(&[0, 1]).unwrap(), 10.0).unwrap();
    assert!((r - direct).abs() < 1e-12);
}

#[test]
fn algorithm1_aligned_rank_one() {
    let (tg, rg) = (UpaGeometry::new(4, 4), UpaGeometry::new(2, 2));
    let f = Codebook::<f64>::kronecker_dft(tg, 1).unwrap();
    let w = Codebook::<f64>::kronecker_dft(rg, 1).unwrap();
    let dims = SystemDims::new(16, 4, 1, 1, 100, 3.0).unwrap();
    let (i, j) = (9, 2);
    let h = ComplexMatrix::from_fn(4, 16, |r, c| w.beam(j)[r] * f.beam(i)[c].conj() * 8.0);
    let (tx, rx, r) = algorithm1_selection(&h, &f, &w, &dims, DEFAULT_SEARCH_BUDGET).unwrap();
    assert_eq!((tx, rx), (vec![i], vec![j]));
    assert!((r - (1.0f64 + 3.0 * 64.0).log2()).abs() < 1e-10);
}

#[test]
fn algorithm1_matches_reenumeration() {
    let mut g = rng(8);
    let f = random_codebook(UpaGeometry::new(3, 2), 6, &mut g);
    let w = random_codebook(UpaGeometry::new(2, 2), 4, &mut g);
    let dims = SystemDims::new(6, 4, 2, 2, 100, 4.0).unwrap();
    let h = gaussian(4, 6, &mut g);
    let mut best = (f64::NEG_INFINITY, vec![], vec![]);
    let mut count = 0;
    for tx in enumerate_selections(6, 2).unwrap() {
        for rx in enumerate_selections(4, 2).unwrap() {
            count += 1;
            let (_, r) = optimal_baseband(&h, &f.matrix(&tx).unwrap(), &w.matrix(&rx).unwrap(), 4.0).unwrap();
            if r > best.0 {
                best = (r, tx.clone(), rx);
            }
        }
    }
    assert_eq!(count, 90);
    let (tx, rx, r) = algorithm1_selection(&h, &f, &w, &dims, DEFAULT_SEARCH_BUDGET).unwrap();
    assert!((r - best.0).abs() < 1e-10);
    assert_eq!((tx, rx), (best.1, best.2));
}

#[test]
fn algorithm1_budget() {
    let f = Codebook::<f64>::kronecker_dft(UpaGeometry::new(4, 4), 1).unwrap();
    let w = Codebook::<f64>::kronecker_dft(UpaGeometry::new(2, 2), 1).unwrap();
    let dims = SystemDims::new(16, 4, 4, 2, 100, 1.0).unwrap();
    let h = ComplexMatrix::<f64>::zeros(4, 16);
    match algorithm1(&h, &f, &w, &dims, 100) {
        Err(HybridError::BudgetExceeded { pairs, budget }) => assert_eq!((pairs, budget), (1820 * 6, 100)),
        other => panic!("expected budget error, got {other:?}"),
    }
}

#[test]
fn dims_validation() {
    assert!(SystemDims::new(16, 4, 4, 4, 10, 1.0).is_err());
    assert!(SystemDims::new(16, 4, 2, 3, 10, 1.0).is_err());
    assert!(SystemDims::new(16, 4, 4, 2, 10, 0.0).is_err());
    assert!(SystemDims::new(16, 4, 4, 2, 0, 1.0).is_err());
    assert_eq!(SystemDims::new(16, 4, 4, 2, 10, 1.0).unwrap().m_s, 2);
}

#[test]
fn pre_log_arithmetic() {
    assert!((pre_log(1024, 1200) - 176.0 / 1200.0).abs() < 1e-15);
    assert_eq!(pre_log(1200, 1200), 0.0);
    assert!((effective_rate(&[10.0, 20.0], 60, 1200).unwrap() - 15.0 * 0.95).abs() < 1e-12);
    assert!(matches!(effective_rate(&[1.0], 1201, 1200), Err(HybridError::TrainingTooLong { .. })));
    assert!(matches!(effective_rate(&[], 1, 1200), Err(HybridError::NoBlocks)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn optimal_baseband_meets_power(seed in any::<u64>(), k in 1usize..4, snr_db in -10.0f64..30.0) {
        let mut g = rng(seed);
        let h = gaussian(4, 8, &mut g);
        let f_rf = gaussian(8, k + 1, &mut g);
        let w_rf = gaussian(4, k, &mut g);
        let snr = 10f64.powf(snr_db / 10.0);
        let (bf, r) = optimal_baseband(&h, &f_rf, &w_rf, snr).unwrap();
        prop_assert!((bf.transmit_power() - 1.0).abs() < 1e-9);
        prop_assert!((achieved_rate(&h, &bf, snr).unwrap() - r).abs() < 1e-8 * (1.0 + r));
        // Combiner is whitened: its Gram matrix is the identity.
        prop_assert!(dist_to_identity(&bf.combiner().gram()) < 1e-9);
    }

    #[test]
    fn larger_codebook_never_hurts(seed in any::<u64>()) {
        let mut g = rng(seed);
        let small = random_codebook(UpaGeometry::new(3, 2), 4, &mut g);
        let extra = random_codebook(UpaGeometry::new(3, 2), 2, &mut g);
        let mut beams = small.beams().to_vec();
        beams.extend(extra.beams().iter().cloned());
        let big = Codebook::from_beams(UpaGeometry::new(3, 2), beams).unwrap();
        let w = random_codebook(UpaGeometry::new(2, 2), 3, &mut g);
        let dims = SystemDims::new(6, 4, 2, 1, 100, 5.0).unwrap();
        let h = gaussian(4, 6, &mut g);
        let (_, a) = algorithm1(&h, &small, &w, &dims, DEFAULT_SEARCH_BUDGET).unwrap();
        let (_, b) = algorithm1(&h, &big, &w, &dims, DEFAULT_SEARCH_BUDGET).unwrap();
        prop_assert!(b >= a - 1e-10);
    }
}
