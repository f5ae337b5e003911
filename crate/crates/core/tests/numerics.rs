mod common;

use ckm_beamforming::numerics::{
    allocation_rate, evd_hermitian, hermitian_inv_sqrt, khatri_rao, svd, water_filling, ComplexMatrix, LinalgError,
    QrFactorization,
};
use ckm_beamforming::{CMat, CMat32};
use common::*;
use proptest::prelude::*;

#[test]
fn inv_sqrt_examples() {
    let i4 = ComplexMatrix::<f64>::identity(4);
    assert!(rel_err(&hermitian_inv_sqrt(&i4).unwrap(), &i4) < 1e-14);
    let d = ComplexMatrix::<f64>::real_diagonal(&[4.0, 9.0]);
    let expected = ComplexMatrix::<f64>::real_diagonal(&[0.5, 1.0 / 3.0]);
    assert!(rel_err(&hermitian_inv_sqrt(&d).unwrap(), &expected) < 1e-14);
}

#[test]
fn inv_sqrt_singular_names_eigenvalue() {
    let d = ComplexMatrix::<f64>::real_diagonal(&[1.0, 1e-14]);
    match hermitian_inv_sqrt(&d) {
        Err(LinalgError::Singular { eigenvalue, .. }) => assert!((eigenvalue - 1e-14).abs() < 1e-20),
        other => panic!("expected singular error, got {other:?}"),
    }
}

#[test]
fn khatri_rao_identity_basis() {
    let i2 = ComplexMatrix::<f64>::identity(2);
    let k = khatri_rao(&i2, &i2).unwrap();
    assert_eq!(k.shape(), (4, 2));
    for r in 0..4 {
        assert_eq!(k[(r, 0)].re, if r == 0 { 1.0 } else { 0.0 });
        assert_eq!(k[(r, 1)].re, if r == 3 { 1.0 } else { 0.0 });
    }
    assert!(khatri_rao(&i2, &ComplexMatrix::<f64>::identity(3)).is_err());
}

#[test]
fn khatri_rao_zero_vector() {
    let mut g = rng(4);
    let (a, b) = (gaussian(2, 3, &mut g), gaussian(2, 3, &mut g));
    let y = khatri_rao(&a, &b).unwrap().mul_vec(&[c(0.0, 0.0); 3]).unwrap();
    assert!(y.iter().all(|v| v.norm() == 0.0));
}

/// Maximizes the two-stream rate over `rho_1` by golden-section search.
fn golden_two_stream(s: [f64; 2], snr: f64) -> f64 {
    let f = |x: f64| allocation_rate(&[x, 1.0 - x], &s, snr);
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if f(x1) < f(x2) {
            a = x1;
        } else {
            b = x2;
        }
    }
    (a + b) / 2.0
}

#[test]
fn water_filling_examples() {
    let p = water_filling(&[1.0f64, 1.0], 3.0).unwrap();
    assert!((p.coefficients[0] - 0.5).abs() < 1e-12 && (p.coefficients[1] - 0.5).abs() < 1e-12);
    assert_eq!(water_filling(&[0.7f64], 5.0).unwrap().coefficients, vec![1.0]);
    let p = water_filling(&[2.0f64, 1.0], 1.0).unwrap();
    let oracle = golden_two_stream([2.0, 1.0], 1.0);
    assert!((p.coefficients[0] - oracle).abs() < 1e-8, "{} vs {oracle}", p.coefficients[0]);
    // Closed form: mu - 1/4 + mu - 1 = 1.
    assert!((p.coefficients[0] - 0.875).abs() < 1e-12);
}

#[test]
fn svd_examples() {
    let s = svd(&ComplexMatrix::<f64>::identity(3)).unwrap();
    assert!(s.singular_values.iter().all(|v| (v - 1.0).abs() < 1e-13));
    let mut g = rng(8);
    let mut u = gaussian_vec(4, &mut g);
    let mut v = gaussian_vec(3, &mut g);
    let nu = u.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    u.iter_mut().for_each(|x| *x /= nu);
    v.iter_mut().for_each(|x| *x /= nv);
    let a = ComplexMatrix::from_fn(4, 3, |r, c| u[r] * v[c].conj());
    let s = svd(&a).unwrap();
    assert!((s.singular_values[0] - 1.0).abs() < 1e-12);
    assert!(s.singular_values[1..].iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn non_finite_rejected() {
    let mut a = ComplexMatrix::<f64>::identity(2);
    a[(0, 1)] = c(f64::NAN, 0.0);
    assert!(matches!(svd(&a), Err(LinalgError::NonFinite { .. })));
}

#[test]
fn generic_scalar_f32() {
    let a: CMat32 = ComplexMatrix::<f64>::real_diagonal(&[4.0, 9.0]).cast();
    let b = hermitian_inv_sqrt(&a).unwrap();
    assert!((b[(0, 0)].re - 0.5f32).abs() < 1e-6);
    let p = water_filling(&[2.0f32, 1.0], 1.0).unwrap();
    assert!((p.coefficients[0] - 0.875).abs() < 1e-5);
    let s = svd(&b).unwrap();
    assert!((s.singular_values[0] - 0.5).abs() < 1e-6);
}

fn unitary_defect(u: &CMat) -> f64 {
    dist_to_identity(&u.adjoint().matmul(u).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn svd_reconstructs(seed in any::<u64>(), m in 1usize..7, n in 1usize..7) {
        let mut g = rng(seed);
        let a = gaussian(m, n, &mut g);
        let s = svd(&a).unwrap();
        prop_assert!(rel_err(&s.reconstruct(), &a) <= 1e-10);
        prop_assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.singular_values.iter().all(|v| *v >= 0.0));
        prop_assert!(unitary_defect(&s.u) < 1e-10);
        prop_assert!(unitary_defect(&s.v) < 1e-10);
    }

    #[test]
    fn evd_reconstructs(seed in any::<u64>(), n in 1usize..7) {
        let mut g = rng(seed);
        let x = gaussian(n, n, &mut g);
        let a = (&x + &x.adjoint()).hermitian_part();
        let (vals, vecs) = evd_hermitian(&a).unwrap();
        prop_assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let d = ComplexMatrix::real_diagonal(&vals);
        let back = vecs.matmul(&d).unwrap().matmul(&vecs.adjoint()).unwrap();
        prop_assert!(rel_err(&back, &a) <= 1e-10);
        prop_assert!(unitary_defect(&vecs) < 1e-10);
    }

    #[test]
    fn inv_sqrt_whitens(seed in any::<u64>(), n in 1usize..6) {
        let mut g = rng(seed);
        let a = random_hpd(n, &mut g);
        let b = hermitian_inv_sqrt(&a).unwrap();
        let w = b.matmul(&a).unwrap().matmul(&b.adjoint()).unwrap();
        prop_assert!(dist_to_identity(&w) <= 1e-10);
        prop_assert!((&b - &b.adjoint()).frobenius_norm() <= 1e-12);
    }

    #[test]
    fn khatri_rao_vectorizes(seed in any::<u64>(), ra in 1usize..5, rb in 1usize..5, k in 1usize..5) {
        let mut g = rng(seed);
        let a = gaussian(ra, k, &mut g);
        let b = gaussian(rb, k, &mut g);
        let x = gaussian_vec(k, &mut g);
        let lhs = naive_mul(&naive_mul(&b, &ComplexMatrix::diagonal(&x)), &a.transpose()).vec();
        let rhs = khatri_rao(&a, &b).unwrap().mul_vec(&x).unwrap();
        let err: f64 = lhs.iter().zip(&rhs).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-12 * (1.0 + lhs.iter().map(|v| v.norm()).fold(0.0, f64::max)));
    }

    #[test]
    fn qr_matches_normal_equations(seed in any::<u64>(), m in 3usize..8, n in 1usize..4) {
        let mut g = rng(seed);
        let a = gaussian(m, n, &mut g);
        let b = gaussian_vec(m, &mut g);
        let (x, _) = QrFactorization::new(&a).unwrap().solve(&b).unwrap();
        // Residual is orthogonal to the column space.
        let r: Vec<_> = a.mul_vec(&x).unwrap().iter().zip(&b).map(|(p, q)| q - p).collect();
        let ahr = a.adjoint().mul_vec(&r).unwrap();
        prop_assert!(ahr.iter().all(|v| v.norm() < 1e-10));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn water_filling_beats_equal_power(
        sv in prop::collection::vec(0.0f64..3.0, 1..6),
        snr_db in -10.0f64..30.0,
    ) {
        prop_assume!(sv.iter().any(|s| *s > 1e-6));
        let snr = 10f64.powf(snr_db / 10.0);
        let p = water_filling(&sv, snr).unwrap();
        let sum: f64 = p.coefficients.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-10);
        prop_assert!(p.coefficients.iter().all(|r| *r >= 0.0));
        let eq = vec![1.0 / sv.len() as f64; sv.len()];
        prop_assert!(p.rate_bits(&sv, snr) >= allocation_rate(&eq, &sv, snr) - 1e-12);
    }
}
