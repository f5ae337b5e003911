use num_complex::Complex;

use super::matrix::{inner, norm_sqr, ComplexMatrix};
use super::LinalgError;
use crate::scalar::{czero, Real};

const MAX_SWEEPS: usize = 100;

/// Singular value decomposition `A = U * Diag(sigma) * V^H` with full unitary `U` and `V`.
#[derive(Debug, Clone)]
pub struct SvdResult<T: Real> {
    pub u: ComplexMatrix<T>,
    /// Nonincreasing, length `min(rows, cols)`.
    pub singular_values: Vec<T>,
    pub v: ComplexMatrix<T>,
}

impl<T: Real> SvdResult<T> {
    /// Rebuilds `U * Sigma * V^H` with the input's shape.
    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        let (m, n) = (self.u.rows(), self.v.rows());
        ComplexMatrix::from_fn(m, n, |r, c| {
            self.singular_values
                .iter()
                .enumerate()
                .map(|(k, s)| self.u[(r, k)] * self.v[(c, k)].conj() * *s)
                .sum()
        })
    }
}

fn check_finite<T: Real>(a: &ComplexMatrix<T>, context: &'static str) -> Result<(), LinalgError> {
    if a.is_finite() {
        Ok(())
    } else {
        Err(LinalgError::NonFinite { context })
    }
}

fn check_hermitian<T: Real>(a: &ComplexMatrix<T>, context: &'static str) -> Result<(), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            context,
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    check_finite(a, context)?;
    let n = a.rows();
    let mut dev = T::zero();
    for r in 0..n {
        for c in 0..n {
            dev += (a[(r, c)] - a[(c, r)].conj()).norm_sqr();
        }
    }
    let dev = dev.sqrt();
    if dev > T::hermitian_tolerance() * a.frobenius_norm().max(T::one()) {
        return Err(LinalgError::NotHermitian {
            context,
            deviation: dev.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Jacobi rotation parameters zeroing the off-diagonal `g` of the Hermitian
/// 2x2 block `[[a, g], [conj(g), b]]`. Returns `(c, s, phase)` where `phase`
/// is `g / |g|`; the rotation is
/// `G = [[c, s], [-s * conj(phase), c * conj(phase)]]`.
fn jacobi_params<T: Real>(a: T, b: T, g: Complex<T>) -> (T, T, Complex<T>) {
    let mag = g.norm();
    let phase = g / mag;
    let theta = (b - a) / (mag + mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
    let c = T::one() / (t * t + T::one()).sqrt();
    (c, t * c, phase)
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Eigenvalues come back nonincreasing; eigenvector `k` is column `k`.
pub fn evd_hermitian<T: Real>(a: &ComplexMatrix<T>) -> Result<(Vec<T>, ComplexMatrix<T>), LinalgError> {
    check_hermitian(a, "evd_hermitian")?;
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = m.frobenius_norm();
    if scale == T::zero() {
        return Ok((vec![T::zero(); n], v));
    }
    let eps = T::epsilon();
    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= eps * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = m[(p, q)];
                if g.norm() <= eps * eps * scale {
                    continue;
                }
                let (c, s, phase) = jacobi_params(m[(p, p)].re, m[(q, q)].re, g);
                let ph = phase.conj();
                let gpp = Complex::new(c, T::zero());
                let gpq = Complex::new(s, T::zero());
                let gqp = ph * (-s);
                let gqq = ph * c;
                // M <- M G
                for k in 0..n {
                    let mp = m[(k, p)];
                    let mq = m[(k, q)];
                    m[(k, p)] = mp * gpp + mq * gqp;
                    m[(k, q)] = mp * gpq + mq * gqq;
                }
                // M <- G^H M
                for k in 0..n {
                    let mp = m[(p, k)];
                    let mq = m[(q, k)];
                    m[(p, k)] = gpp.conj() * mp + gqp.conj() * mq;
                    m[(q, k)] = gpq.conj() * mp + gqq.conj() * mq;
                }
                m[(p, q)] = czero();
                m[(q, p)] = czero();
                m[(p, p)].im = T::zero();
                m[(q, q)].im = T::zero();
                for k in 0..n {
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = vp * gpp + vq * gqp;
                    v[(k, q)] = vp * gpq + vq * gqq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].re.partial_cmp(&m[(i, i)].re).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    Ok((values, v.select_columns(&order)))
}

/// Returns `B = A^{-1/2}` for Hermitian positive-definite `A`.
///
/// Eigenvalues below `singular_tolerance * lambda_max` are reported as
/// [`LinalgError::Singular`] instead of being regularized.
pub fn hermitian_inv_sqrt<T: Real>(a: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>, LinalgError> {
    let (values, vecs) = evd_hermitian(a)?;
    let n = values.len();
    if n == 0 {
        return Err(LinalgError::Empty {
            context: "hermitian_inv_sqrt",
        });
    }
    let lmax = values[0];
    let lmin = values[n - 1];
    let threshold = T::singular_tolerance() * lmax.max(T::zero());
    if lmin <= threshold || lmax <= T::zero() {
        return Err(LinalgError::Singular {
            context: "hermitian_inv_sqrt",
            eigenvalue: lmin.to_f64_lossy(),
            threshold: threshold.to_f64_lossy(),
        });
    }
    let inv: Vec<T> = values.iter().map(|l| T::one() / l.sqrt()).collect();
    let b = ComplexMatrix::from_fn(n, n, |r, c| {
        (0..n).map(|k| vecs[(r, k)] * vecs[(c, k)].conj() * inv[k]).sum()
    });
    Ok(b.hermitian_part())
}

/// Gram-Schmidt completion of orthonormal columns to a full unitary basis of dimension `dim`.
fn complete_basis<T: Real>(mut cols: Vec<Vec<Complex<T>>>, dim: usize) -> Vec<Vec<Complex<T>>> {
    let mut candidate = 0;
    while cols.len() < dim && candidate < dim {
        let mut v = vec![czero::<T>(); dim];
        v[candidate] = Complex::new(T::one(), T::zero());
        candidate += 1;
        for _ in 0..2 {
            for c in &cols {
                let proj = inner(c, &v);
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= *y * proj;
                }
            }
        }
        let nrm = norm_sqr(&v).sqrt();
        if nrm > T::lit(1e-3) {
            v.iter_mut().for_each(|x| *x /= nrm);
            cols.push(v);
        }
    }
    cols
}

/// SVD by one-sided (Hestenes) Jacobi rotations.
pub fn svd<T: Real>(a: &ComplexMatrix<T>) -> Result<SvdResult<T>, LinalgError> {
    check_finite(a, "svd")?;
    if a.rows() == 0 || a.cols() == 0 {
        return Err(LinalgError::Empty { context: "svd" });
    }
    if a.rows() < a.cols() {
        let t = svd_tall(&a.adjoint());
        return Ok(SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    Ok(svd_tall(a))
}

fn svd_tall<T: Real>(a: &ComplexMatrix<T>) -> SvdResult<T> {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<Complex<T>>> = (0..n).map(|c| a.column(c)).collect();
    let mut v = ComplexMatrix::<T>::identity(n);
    let eps = T::epsilon();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = norm_sqr(&cols[p]);
                let beta = norm_sqr(&cols[q]);
                let gamma = inner(&cols[p], &cols[q]);
                if gamma.norm() <= eps * (alpha * beta).sqrt() || gamma.norm() == T::zero() {
                    continue;
                }
                rotated = true;
                let (c, s, phase) = jacobi_params(alpha, beta, gamma);
                let ph = phase.conj();
                let gqp = ph * (-s);
                let gqq = ph * c;
                for k in 0..m {
                    let xp = cols[p][k];
                    let xq = cols[q][k];
                    cols[p][k] = xp * c + xq * gqp;
                    cols[q][k] = xp * s + xq * gqq;
                }
                for k in 0..n {
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = vp * c + vq * gqp;
                    v[(k, q)] = vp * s + vq * gqq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<T> = cols.iter().map(|c| norm_sqr(c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));
    let singular_values: Vec<T> = order.iter().map(|&i| norms[i]).collect();
    let smax = singular_values[0];
    let mut ucols = Vec::with_capacity(m);
    for &i in &order {
        // Columns of negligible norm carry no direction; they are rebuilt by completion.
        if norms[i] > smax * T::lit(16.0) * eps && norms[i] > T::min_positive_value() {
            ucols.push(cols[i].iter().map(|x| *x / norms[i]).collect::<Vec<_>>());
        } else {
            break;
        }
    }
    let u = ComplexMatrix::from_columns(&complete_basis(ucols, m)).expect("consistent column lengths");
    SvdResult {
        u,
        singular_values,
        v: v.select_columns(&order),
    }
}

/// Ratio of largest to smallest singular value; infinite when rank deficient.
pub fn condition_number<T: Real>(a: &ComplexMatrix<T>) -> Result<T, LinalgError> {
    let s = svd(a)?.singular_values;
    let smin = *s.last().expect("nonempty");
    if smin <= T::zero() {
        Ok(T::infinity())
    } else {
        Ok(s[0] / smin)
    }
}

/// Natural-log determinant of a Hermitian positive-definite matrix via Cholesky.
pub fn hermitian_logdet<T: Real>(a: &ComplexMatrix<T>) -> Result<T, LinalgError> {
    check_hermitian(a, "hermitian_logdet")?;
    let n = a.rows();
    let mut l = ComplexMatrix::<T>::zeros(n, n);
    let mut logdet = T::zero();
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= T::zero() || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite {
                context: "hermitian_logdet",
            });
        }
        let ljj = d.sqrt();
        l[(j, j)] = Complex::new(ljj, T::zero());
        logdet += d.ln();
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(logdet)
}

/// Column-wise Kronecker product: column `k` is `kron(a_k, b_k)`, so that
/// `vec(B * Diag(x) * A^T) = khatri_rao(A, B) * x`.
pub fn khatri_rao<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>, LinalgError> {
    if a.cols() != b.cols() {
        return Err(LinalgError::DimensionMismatch {
            context: "khatri_rao",
            expected: (b.rows(), a.cols()),
            actual: (b.rows(), b.cols()),
        });
    }
    let rb = b.rows();
    Ok(ComplexMatrix::from_fn(a.rows() * rb, a.cols(), |r, c| {
        a[(r / rb, c)] * b[(r % rb, c)]
    }))
}

/// Householder QR of a tall matrix, kept for repeated least-squares solves.
#[derive(Debug, Clone)]
pub struct QrFactorization<T: Real> {
    rows: usize,
    cols: usize,
    /// Householder vectors, one per column, each of length `rows - k`.
    reflectors: Vec<Vec<Complex<T>>>,
    /// Upper-triangular factor, `cols x cols`.
    r: ComplexMatrix<T>,
}

impl<T: Real> QrFactorization<T> {
    /// Factors `a` (rows >= cols); fails if a pivot falls below
    /// `singular_tolerance * max |R_kk|`.
    pub fn new(a: &ComplexMatrix<T>) -> Result<Self, LinalgError> {
        check_finite(a, "qr")?;
        let (m, n) = a.shape();
        if m < n {
            return Err(LinalgError::DimensionMismatch {
                context: "qr (needs rows >= cols)",
                expected: (n, n),
                actual: (m, n),
            });
        }
        if n == 0 {
            return Err(LinalgError::Empty { context: "qr" });
        }
        let mut w = a.clone();
        let mut reflectors = Vec::with_capacity(n);
        for k in 0..n {
            let mut x: Vec<Complex<T>> = (k..m).map(|r| w[(r, k)]).collect();
            let nrm = norm_sqr(&x).sqrt();
            if nrm == T::zero() {
                reflectors.push(vec![czero(); m - k]);
                continue;
            }
            let phase = if x[0].norm() > T::zero() {
                x[0] / x[0].norm()
            } else {
                Complex::new(T::one(), T::zero())
            };
            x[0] += phase * nrm;
            let vn = norm_sqr(&x).sqrt();
            x.iter_mut().for_each(|e| *e /= vn);
            for c in k..n {
                let col: Vec<Complex<T>> = (k..m).map(|r| w[(r, c)]).collect();
                let proj = inner(&x, &col) * T::lit(2.0);
                for (i, r) in (k..m).enumerate() {
                    w[(r, c)] -= x[i] * proj;
                }
            }
            reflectors.push(x);
        }
        let r = ComplexMatrix::from_fn(n, n, |i, j| if j >= i { w[(i, j)] } else { czero() });
        let dmax = (0..n).map(|i| r[(i, i)].norm()).fold(T::zero(), T::max);
        for i in 0..n {
            let d = r[(i, i)].norm();
            if d <= T::singular_tolerance() * dmax || dmax == T::zero() {
                return Err(LinalgError::RankDeficient {
                    context: "qr",
                    column: i,
                    pivot: d.to_f64_lossy(),
                });
            }
        }
        Ok(Self {
            rows: m,
            cols: n,
            reflectors,
            r,
        })
    }

    pub fn r(&self) -> &ComplexMatrix<T> {
        &self.r
    }

    /// Least-squares solution of `A x = b`; returns `(x, ||A x - b||)`.
    pub fn solve(&self, b: &[Complex<T>]) -> Result<(Vec<Complex<T>>, T), LinalgError> {
        if b.len() != self.rows {
            return Err(LinalgError::DimensionMismatch {
                context: "qr solve",
                expected: (self.rows, 1),
                actual: (b.len(), 1),
            });
        }
        let mut y = b.to_vec();
        for (k, v) in self.reflectors.iter().enumerate() {
            let proj = inner(v, &y[k..]) * T::lit(2.0);
            for (i, vi) in v.iter().enumerate() {
                y[k + i] -= *vi * proj;
            }
        }
        let n = self.cols;
        let residual = norm_sqr(&y[n..]).sqrt();
        let mut x = vec![czero::<T>(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in (i + 1)..n {
                s -= self.r[(i, j)] * x[j];
            }
            x[i] = s / self.r[(i, i)];
        }
        Ok((x, residual))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn sample(rows: usize, cols: usize, seed: u64) -> ComplexMatrix<f64> {
        // Small LCG; enough variety for unit tests without pulling in rand here.
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        ComplexMatrix::from_fn(rows, cols, |_, _| c(next(), next()))
    }

    #[test]
    fn inv_sqrt_of_diagonal() {
        let a = ComplexMatrix::<f64>::real_diagonal(&[4.0, 9.0]);
        let b = hermitian_inv_sqrt(&a).unwrap();
        assert!((b[(0, 0)].re - 0.5).abs() < 1e-14);
        assert!((b[(1, 1)].re - 1.0 / 3.0).abs() < 1e-14);
        assert!(b[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn inv_sqrt_rejects_singular_and_non_hermitian() {
        let a = ComplexMatrix::<f64>::real_diagonal(&[1.0, 0.0]);
        assert!(matches!(hermitian_inv_sqrt(&a), Err(LinalgError::Singular { .. })));
        let mut b = ComplexMatrix::<f64>::identity(2);
        b[(0, 1)] = c(0.5, 0.0);
        assert!(matches!(hermitian_inv_sqrt(&b), Err(LinalgError::NotHermitian { .. })));
    }

    #[test]
    fn evd_reconstructs() {
        let x = sample(5, 5, 3);
        let a = x.gram();
        let (vals, vecs) = evd_hermitian(&a).unwrap();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let rec = &(&vecs * &ComplexMatrix::real_diagonal(&vals)) * &vecs.adjoint();
        assert!((&rec - &a).frobenius_norm() / a.frobenius_norm() < 1e-12);
        let id = &vecs.adjoint() * &vecs;
        assert!((&id - &ComplexMatrix::identity(5)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn svd_wide_and_tall() {
        for (m, n) in [(4, 6), (6, 4), (3, 3), (1, 5)] {
            let a = sample(m, n, (m * 10 + n) as u64);
            let s = svd(&a).unwrap();
            assert_eq!(s.u.shape(), (m, m));
            assert_eq!(s.v.shape(), (n, n));
            let rec = s.reconstruct();
            assert!((&rec - &a).frobenius_norm() / a.frobenius_norm() < 1e-12);
            let uu = &s.u.adjoint() * &s.u;
            assert!((&uu - &ComplexMatrix::identity(m)).frobenius_norm() < 1e-12);
            let vv = &s.v.adjoint() * &s.v;
            assert!((&vv - &ComplexMatrix::identity(n)).frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn svd_rank_one() {
        let u = [c(0.6, 0.0), c(0.0, 0.8)];
        let v = [c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)];
        let a = ComplexMatrix::from_fn(2, 3, |r, k| u[r] * v[k].conj());
        let s = svd(&a).unwrap();
        assert!((s.singular_values[0] - 1.0).abs() < 1e-14);
        assert!(s.singular_values[1].abs() < 1e-14);
    }

    #[test]
    fn qr_solves_least_squares() {
        let a = sample(7, 3, 11);
        let x_true = vec![c(1.0, -2.0), c(0.5, 0.25), c(-1.0, 0.0)];
        let b = a.mul_vec(&x_true).unwrap();
        let qr = QrFactorization::new(&a).unwrap();
        let (x, res) = qr.solve(&b).unwrap();
        assert!(res < 1e-12);
        for (p, q) in x.iter().zip(&x_true) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn qr_flags_rank_deficiency() {
        let a = ComplexMatrix::from_fn(4, 2, |r, _| c(r as f64, 1.0));
        assert!(matches!(QrFactorization::new(&a), Err(LinalgError::RankDeficient { .. })));
    }

    #[test]
    fn logdet_matches_eigenvalues() {
        let a = &sample(4, 4, 5).gram() + &ComplexMatrix::identity(4);
        let (vals, _) = evd_hermitian(&a).unwrap();
        let expect: f64 = vals.iter().map(|v| v.ln()).sum();
        assert!((hermitian_logdet(&a).unwrap() - expect).abs() < 1e-11);
    }

    #[test]
    fn khatri_rao_identity() {
        let id = ComplexMatrix::<f64>::identity(2);
        let k = khatri_rao(&id, &id).unwrap();
        assert_eq!(k.shape(), (4, 2));
        assert_eq!(k[(0, 0)], c(1.0, 0.0));
        assert_eq!(k[(3, 1)], c(1.0, 0.0));
        assert_eq!(k.frobenius_norm_sqr(), 2.0);
    }

    #[test]
    fn f32_paths_work() {
        let a = sample(3, 3, 9).gram().cast::<f32>();
        let a = &a + &ComplexMatrix::identity(3);
        let b = hermitian_inv_sqrt(&a).unwrap();
        let w = &(&b * &a) * &b.adjoint();
        assert!((&w - &ComplexMatrix::identity(3)).frobenius_norm() < 1e-4);
    }
}
