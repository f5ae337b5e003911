//! UPA responses, geometric channels, angle grids, the synthetic scene and path import.

mod grid;
mod path_csv;
mod scene;

pub use grid::{nearest_grid_angles, AngleGrid, GridAngle, GridTuple};
pub use path_csv::{export_paths_csv, import_paths_csv, PathCsvError, PATH_CSV_HEADER};
pub use scene::{generate_scene_paths, Axis, Point3, Reflector, Scene, SceneError, Segment};

use std::f64::consts::PI;

use num_complex::Complex;

use crate::numerics::{kron_vec, ComplexMatrix};
use crate::scalar::{cis, Real};

/// Direction as (zenith in `[0, pi]`, azimuth in `[0, 2pi)`), radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnglePair {
    pub zenith: f64,
    pub azimuth: f64,
}

impl AnglePair {
    /// Builds a pair, wrapping the azimuth into `[0, 2pi)`. The zenith must already be in range.
    pub fn new(zenith: f64, azimuth: f64) -> Self {
        Self {
            zenith,
            azimuth: wrap_azimuth(azimuth),
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=PI).contains(&self.zenith) && (0.0..2.0 * PI).contains(&self.azimuth)
    }

    /// Angle of a (nonzero) direction vector in the global frame.
    pub fn from_direction(d: Point3) -> Self {
        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let zenith = (d[2] / r).clamp(-1.0, 1.0).acos();
        Self::new(zenith, d[1].atan2(d[0]))
    }

    /// Unit vector pointing along this direction.
    pub fn direction(&self) -> Point3 {
        let (sz, cz) = self.zenith.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        [sz * ca, sz * sa, cz]
    }
}

pub(crate) fn wrap_azimuth(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let w = a.rem_euclid(two_pi);
    // rem_euclid can round up to exactly 2pi for tiny negative inputs
    if w >= two_pi {
        0.0
    } else {
        w
    }
}

/// Uniform planar array in the y-z plane; element `(m, n)` sits at index `m * n_y + n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpaGeometry {
    pub n_z: usize,
    pub n_y: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
}

impl UpaGeometry {
    pub fn new(n_z: usize, n_y: usize) -> Self {
        assert!(n_z >= 1 && n_y >= 1, "UPA needs at least one element per axis");
        Self { n_z, n_y, spacing: 0.5 }
    }

    pub fn with_spacing(mut self, spacing: f64) -> Self {
        self.spacing = spacing;
        self
    }

    pub fn elements(&self) -> usize {
        self.n_z * self.n_y
    }

    /// Per-axis phase increments `(cos(zenith), sin(zenith) sin(azimuth))` scaled by `2 pi spacing`.
    fn phase_steps(&self, angle: &AnglePair) -> (f64, f64) {
        let k = 2.0 * PI * self.spacing;
        (k * angle.zenith.cos(), k * angle.zenith.sin() * angle.azimuth.sin())
    }
}

/// The z-axis and y-axis factors of a steering vector; their Kronecker product is the full response.
pub fn steering_factors<T: Real>(geom: &UpaGeometry, angle: &AnglePair) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
    let (pz, py) = geom.phase_steps(angle);
    let sz = T::lit(1.0 / (geom.n_z as f64).sqrt());
    let sy = T::lit(1.0 / (geom.n_y as f64).sqrt());
    let az = (0..geom.n_z).map(|m| cis(T::lit(pz * m as f64)) * sz).collect();
    let ay = (0..geom.n_y).map(|n| cis(T::lit(py * n as f64)) * sy).collect();
    (az, ay)
}

/// Unit-norm array response
/// `a[m * n_y + n] = exp(j 2 pi d (m cos(zenith) + n sin(zenith) sin(azimuth))) / sqrt(M)`.
pub fn steering_vector<T: Real>(geom: &UpaGeometry, angle: &AnglePair) -> Vec<Complex<T>> {
    let (az, ay) = steering_factors(geom, angle);
    kron_vec(&az, &ay)
}

/// Steering vectors as columns, `M x angles.len()`.
pub fn steering_matrix<T: Real>(geom: &UpaGeometry, angles: &[AnglePair]) -> ComplexMatrix<T> {
    let cols: Vec<_> = angles.iter().map(|a| steering_vector(geom, a)).collect();
    if cols.is_empty() {
        return ComplexMatrix::zeros(geom.elements(), 0);
    }
    ComplexMatrix::from_columns(&cols).expect("equal-length steering vectors")
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    /// Linear complex amplitude.
    pub gain: Complex<f64>,
    pub aoa: AnglePair,
    pub aod: AnglePair,
}

/// Multipath description of one UE location.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub location: Point3,
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn new(location: Point3, paths: Vec<Path>) -> Self {
        Self { location, paths }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }
}

/// `H = sqrt(M_r M_t) * sum_l alpha_l a_r(aoa_l) a_t(aod_l)^H`.
pub fn synthesize_channel<T: Real>(tx: &UpaGeometry, rx: &UpaGeometry, paths: &PathSet) -> ComplexMatrix<T> {
    let (mt, mr) = (tx.elements(), rx.elements());
    let mut h = ComplexMatrix::zeros(mr, mt);
    let scale = ((mr * mt) as f64).sqrt();
    for p in &paths.paths {
        let at: Vec<Complex<T>> = steering_vector(tx, &p.aod);
        let ar: Vec<Complex<T>> = steering_vector(rx, &p.aoa);
        let g = p.gain * scale;
        let g = Complex::new(T::lit(g.re), T::lit(g.im));
        for (r, a) in ar.iter().enumerate() {
            let ga = g * *a;
            for (c, b) in at.iter().enumerate() {
                h[(r, c)] += ga * b.conj();
            }
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_array_and_broadside() {
        let v: Vec<Complex<f64>> = steering_vector(&UpaGeometry::new(1, 1), &AnglePair::new(0.3, 1.0));
        assert_eq!(v, vec![Complex::new(1.0, 0.0)]);
        let g = UpaGeometry::new(3, 4);
        let v: Vec<Complex<f64>> = steering_vector(&g, &AnglePair::new(PI / 2.0, 0.0));
        for e in v {
            assert!((e - Complex::new(1.0 / 12f64.sqrt(), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn direction_round_trip() {
        let a = AnglePair::new(1.1, 4.0);
        let b = AnglePair::from_direction(a.direction());
        assert!((a.zenith - b.zenith).abs() < 1e-12);
        assert!((a.azimuth - b.azimuth).abs() < 1e-12);
    }

    #[test]
    fn wrap_negative() {
        assert!((wrap_azimuth(-0.5) - (2.0 * PI - 0.5)).abs() < 1e-15);
        assert_eq!(wrap_azimuth(-1e-300), 0.0);
    }

    #[test]
    fn empty_paths_give_zero_channel() {
        let h: ComplexMatrix<f64> =
            synthesize_channel(&UpaGeometry::new(2, 2), &UpaGeometry::new(1, 2), &PathSet::new([0.0; 3], vec![]));
        assert_eq!(h.frobenius_norm(), 0.0);
    }
}
