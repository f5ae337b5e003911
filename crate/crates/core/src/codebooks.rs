//! Kronecker DFT beam codebooks for UPAs, plus subset enumeration.

use itertools::Itertools;
use num_complex::Complex;
use thiserror::Error;

use crate::arrays::{steering_factors, AnglePair, PathSet, UpaGeometry};
use crate::numerics::{inner, kron_vec, ComplexMatrix};
use crate::scalar::{cis, czero, Real};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodebookError {
    #[error("cannot choose {k} beams out of {n}")]
    SubsetTooLarge { n: usize, k: usize },
    #[error("subset size must be at least 1")]
    EmptySubset,
    #[error("beam index {index} out of range for codebook of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("oversampling factor must be at least 1")]
    BadOversampling,
    #[error("beam {index} has length {len}, expected {expected}")]
    BeamLength { index: usize, len: usize, expected: usize },
}

/// Ordered analog beams for one array.
///
/// Beams from [`Codebook::kronecker_dft`] are `f_z(k_z) kron f_y(k_y)` stored at index
/// `k_z * (os * n_y) + k_y`, and their array responses are evaluated per axis.
#[derive(Debug, Clone)]
pub struct Codebook<T: Real> {
    geom: UpaGeometry,
    beams: Vec<Vec<Complex<T>>>,
    oversampling: usize,
    /// Per-axis DFT columns when the codebook has Kronecker structure.
    factors: Option<(Vec<Vec<Complex<T>>>, Vec<Vec<Complex<T>>>)>,
}

fn dft_column<T: Real>(n: usize, k: usize, os: usize) -> Vec<Complex<T>> {
    let s = T::lit(1.0 / (n as f64).sqrt());
    (0..n)
        .map(|m| {
            // Reduce m*k modulo the period first so the phase stays small.
            let r = (m * k) % (os * n);
            cis(T::lit(2.0 * std::f64::consts::PI * r as f64 / (os * n) as f64)) * s
        })
        .collect()
}

impl<T: Real> Codebook<T> {
    /// Oversampled Kronecker DFT codebook with `os^2 * M` beams.
    pub fn kronecker_dft(geom: UpaGeometry, oversampling: usize) -> Result<Self, CodebookError> {
        if oversampling == 0 {
            return Err(CodebookError::BadOversampling);
        }
        let fz: Vec<_> = (0..oversampling * geom.n_z)
            .map(|k| dft_column::<T>(geom.n_z, k, oversampling))
            .collect();
        let fy: Vec<_> = (0..oversampling * geom.n_y)
            .map(|k| dft_column::<T>(geom.n_y, k, oversampling))
            .collect();
        let beams = fz.iter().flat_map(|z| fy.iter().map(move |y| kron_vec(z, y))).collect();
        Ok(Self {
            geom,
            beams,
            oversampling,
            factors: Some((fz, fy)),
        })
    }

    /// Codebook from explicit beams (no Kronecker fast path).
    pub fn from_beams(geom: UpaGeometry, beams: Vec<Vec<Complex<T>>>) -> Result<Self, CodebookError> {
        let expected = geom.elements();
        if let Some((index, b)) = beams.iter().enumerate().find(|(_, b)| b.len() != expected) {
            return Err(CodebookError::BeamLength {
                index,
                len: b.len(),
                expected,
            });
        }
        Ok(Self {
            geom,
            beams,
            oversampling: 1,
            factors: None,
        })
    }

    pub fn geometry(&self) -> &UpaGeometry {
        &self.geom
    }

    pub fn oversampling(&self) -> usize {
        self.oversampling
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn beam(&self, index: usize) -> &[Complex<T>] {
        &self.beams[index]
    }

    pub fn beams(&self) -> &[Vec<Complex<T>>] {
        &self.beams
    }

    /// Identifies geometry and construction; stored alongside beam indices in maps.
    pub fn fingerprint(&self) -> String {
        let kind = if self.factors.is_some() { "kdft" } else { "custom" };
        format!(
            "{kind}-nz{}-ny{}-d{}-os{}-n{}",
            self.geom.n_z,
            self.geom.n_y,
            self.geom.spacing,
            self.oversampling,
            self.beams.len()
        )
    }

    /// Selected beams as columns, `M x indices.len()`.
    pub fn matrix(&self, indices: &[usize]) -> Result<ComplexMatrix<T>, CodebookError> {
        for &index in indices {
            if index >= self.beams.len() {
                return Err(CodebookError::IndexOutOfRange {
                    index,
                    size: self.beams.len(),
                });
            }
        }
        let m = self.geom.elements();
        Ok(ComplexMatrix::from_fn(m, indices.len(), |r, c| self.beams[indices[c]][r]))
    }

    /// `beam^H a(angle)` for every beam.
    pub fn responses(&self, angle: &AnglePair) -> Vec<Complex<T>> {
        match &self.factors {
            Some((fz, fy)) => {
                let (az, ay) = steering_factors::<T>(&self.geom, angle);
                let rz: Vec<_> = fz.iter().map(|f| inner(f, &az)).collect();
                let ry: Vec<_> = fy.iter().map(|f| inner(f, &ay)).collect();
                rz.iter().flat_map(|z| ry.iter().map(move |y| *z * *y)).collect()
            }
            None => {
                let a = crate::arrays::steering_vector::<T>(&self.geom, angle);
                self.beams.iter().map(|b| inner(b, &a)).collect()
            }
        }
    }

    /// Grid direction a Kronecker beam points at, if it corresponds to a real direction.
    ///
    /// The returned azimuth lies in the front half-space `[0, pi/2] U [3pi/2, 2pi)`.
    pub fn beam_direction(&self, index: usize) -> Option<AnglePair> {
        self.factors.as_ref()?;
        let (os, nz, ny) = (self.oversampling, self.geom.n_z, self.geom.n_y);
        let kz = index / (os * ny);
        let ky = index % (os * ny);
        let spatial = |k: usize, n: usize| {
            let u = k as f64 / (os * n) as f64;
            let u = if u >= 0.5 { u - 1.0 } else { u };
            u / self.geom.spacing
        };
        let cz = spatial(kz, nz);
        let sy = spatial(ky, ny);
        if cz.abs() > 1.0 {
            return None;
        }
        let sin_z = (1.0 - cz * cz).sqrt();
        if sy.abs() > sin_z + 1e-12 {
            return None;
        }
        let zenith = cz.acos();
        let azimuth = if sin_z == 0.0 { 0.0 } else { (sy / sin_z).clamp(-1.0, 1.0).asin() };
        Some(AnglePair::new(zenith, azimuth))
    }
}

/// Noiseless beam-pair gains `W^H H F` for a channel built from `paths`, computed per path
/// from array responses instead of forming `H`. Entry `(q, p)` pairs rx beam `q` with tx beam `p`.
pub fn beam_pair_gains<T: Real>(tx: &Codebook<T>, rx: &Codebook<T>, paths: &PathSet) -> ComplexMatrix<T> {
    let mut y = ComplexMatrix::zeros(rx.len(), tx.len());
    let scale = ((tx.geom.elements() * rx.geom.elements()) as f64).sqrt();
    for p in &paths.paths {
        let g = p.gain * scale;
        let g = Complex::new(T::lit(g.re), T::lit(g.im));
        let r = rx.responses(&p.aoa);
        // a_t^H f_p = conj(f_p^H a_t)
        let t: Vec<Complex<T>> = tx.responses(&p.aod).iter().map(|v| v.conj()).collect();
        for (q, rq) in r.iter().enumerate() {
            let gr = g * *rq;
            if gr == czero() {
                continue;
            }
            for (pi, tp) in t.iter().enumerate() {
                y[(q, pi)] += gr * *tp;
            }
        }
    }
    y
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn enumerate_selections(n: usize, k: usize) -> Result<impl Iterator<Item = Vec<usize>> + Clone, CodebookError> {
    if k == 0 {
        return Err(CodebookError::EmptySubset);
    }
    if k > n {
        return Err(CodebookError::SubsetTooLarge { n, k });
    }
    Ok((0..n).combinations(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrays::steering_vector;

    #[test]
    fn dft_orthonormal() {
        let cb = Codebook::<f64>::kronecker_dft(UpaGeometry::new(4, 1), 1).unwrap();
        assert_eq!(cb.len(), 4);
        for i in 0..4 {
            for j in 0..4 {
                let ip = inner(cb.beam(i), cb.beam(j)).norm();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fast_responses_match_direct() {
        let cb = Codebook::<f64>::kronecker_dft(UpaGeometry::new(3, 4), 2).unwrap();
        let angle = AnglePair::new(1.2, 0.4);
        let a: Vec<Complex<f64>> = steering_vector(cb.geometry(), &angle);
        let fast = cb.responses(&angle);
        for (i, f) in fast.iter().enumerate() {
            assert!((inner(cb.beam(i), &a) - f).norm() < 1e-12);
        }
    }

    #[test]
    fn beam_direction_aligns() {
        let cb = Codebook::<f64>::kronecker_dft(UpaGeometry::new(4, 4), 1).unwrap();
        for i in 0..cb.len() {
            if let Some(dir) = cb.beam_direction(i) {
                let r = cb.responses(&dir);
                assert!((r[i].norm() - 1.0).abs() < 1e-9, "beam {i}");
            }
        }
    }

    #[test]
    fn selections_count() {
        assert_eq!(enumerate_selections(6, 2).unwrap().count(), 15);
        assert_eq!(enumerate_selections(3, 3).unwrap().collect::<Vec<_>>(), vec![vec![0, 1, 2]]);
        assert!(enumerate_selections(2, 3).is_err());
        assert_eq!(binomial(8, 2) * binomial(4, 2), 168);
        assert_eq!(binomial(1000, 500), u128::MAX);
    }
}
