use std::f64::consts::PI;

use num_complex::Complex;
use thiserror::Error;

use super::{AnglePair, Path, PathSet};

/// Cartesian position in meters.
pub type Point3 = [f64; 3];

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("UE position {0:?} lies outside the scene's UE region")]
    OutsideRegion(Point3),
    #[error("reflector {index} has negative loss {loss_db} dB")]
    NegativeLoss { index: usize, loss_db: f64 },
    #[error("reflector {index} has an empty or inverted extent")]
    EmptyReflector { index: usize },
    #[error("UE region is empty")]
    EmptyRegion,
    #[error("carrier wavelength must be positive, got {0}")]
    BadWavelength(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// The two in-plane coordinates, in increasing order.
    fn others(self) -> [usize; 2] {
        match self {
            Axis::X => [1, 2],
            Axis::Y => [0, 2],
            Axis::Z => [0, 1],
        }
    }
}

/// Axis-aligned finite rectangle `coord[axis] == offset`.
///
/// It reflects only on the side given by `facing` (+1 or -1) but blocks from both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflector {
    pub name: String,
    pub axis: Axis,
    pub offset: f64,
    /// Ranges of the two in-plane coordinates (see [`Axis`] ordering: y,z / x,z / x,y).
    pub extent: [[f64; 2]; 2],
    pub facing: f64,
    pub loss_db: f64,
}

impl Reflector {
    fn contains_in_plane(&self, p: &Point3) -> bool {
        let [a, b] = self.axis.others();
        let tol = 1e-12;
        p[a] >= self.extent[0][0] - tol
            && p[a] <= self.extent[0][1] + tol
            && p[b] >= self.extent[1][0] - tol
            && p[b] <= self.extent[1][1] + tol
    }

    fn on_reflective_side(&self, p: &Point3) -> bool {
        (p[self.axis.index()] - self.offset) * self.facing > 0.0
    }

    /// Whether the open segment `from -> to` passes through the rectangle.
    pub fn blocks(&self, from: &Point3, to: &Point3) -> bool {
        let k = self.axis.index();
        let (da, db) = (from[k] - self.offset, to[k] - self.offset);
        if da * db >= 0.0 {
            // Same side, or an endpoint on the plane: a touching endpoint is not a blockage.
            return false;
        }
        let t = da / (da - db);
        let p = lerp(from, to, t);
        self.contains_in_plane(&p)
    }

    fn mirror(&self, p: &Point3) -> Point3 {
        let mut m = *p;
        let k = self.axis.index();
        m[k] = 2.0 * self.offset - p[k];
        m
    }
}

/// Straight segment between two points; used by the blockage tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub from: Point3,
    pub to: Point3,
}

impl Segment {
    pub fn length(&self) -> f64 {
        distance(&self.from, &self.to)
    }
}

fn lerp(a: &Point3, b: &Point3, t: f64) -> Point3 {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
}

fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn distance(a: &Point3, b: &Point3) -> f64 {
    let d = sub(a, b);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Static propagation environment with one BS.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub bs_position: Point3,
    pub reflectors: Vec<Reflector>,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Axis-aligned box `[min, max]` of valid UE positions.
    pub ue_region: [Point3; 2],
}

impl Scene {
    pub fn new(
        bs_position: Point3,
        reflectors: Vec<Reflector>,
        wavelength: f64,
        ue_region: [Point3; 2],
    ) -> Result<Self, SceneError> {
        if !(wavelength > 0.0) {
            return Err(SceneError::BadWavelength(wavelength));
        }
        if (0..3).any(|k| !(ue_region[0][k] <= ue_region[1][k])) {
            return Err(SceneError::EmptyRegion);
        }
        for (index, r) in reflectors.iter().enumerate() {
            if !(r.loss_db >= 0.0) {
                return Err(SceneError::NegativeLoss {
                    index,
                    loss_db: r.loss_db,
                });
            }
            if r.extent.iter().any(|e| !(e[0] < e[1])) {
                return Err(SceneError::EmptyReflector { index });
            }
        }
        Ok(Self {
            bs_position,
            reflectors,
            wavelength,
            ue_region,
        })
    }

    /// Wavelength for a carrier frequency in Hz.
    pub fn wavelength_for(frequency_hz: f64) -> f64 {
        SPEED_OF_LIGHT / frequency_hz
    }

    /// Street canyon at 28 GHz: ground, two building faces, a back wall and two
    /// free-standing blockers between the BS and the UE area.
    pub fn urban_canyon() -> Self {
        let wall = |name: &str, axis, offset, extent, facing, loss_db| Reflector {
            name: name.to_string(),
            axis,
            offset,
            extent,
            facing,
            loss_db,
        };
        let reflectors = vec![
            wall("ground", Axis::Z, 0.0, [[-50.0, 250.0], [-30.0, 30.0]], 1.0, 6.0),
            wall("north_facade", Axis::Y, 30.0, [[-50.0, 250.0], [0.0, 40.0]], -1.0, 8.0),
            wall("south_facade", Axis::Y, -30.0, [[-50.0, 250.0], [0.0, 40.0]], 1.0, 8.0),
            wall("back_wall", Axis::X, 180.0, [[-30.0, 30.0], [0.0, 40.0]], -1.0, 10.0),
            wall("kiosk", Axis::X, 80.0, [[-12.0, -2.0], [0.0, 12.0]], -1.0, 7.0),
            wall("bus_shelter", Axis::X, 100.0, [[5.0, 15.0], [0.0, 10.0]], -1.0, 7.0),
        ];
        Self::new(
            [0.0, 0.0, 20.0],
            reflectors,
            Self::wavelength_for(28e9),
            [[40.0, -25.0, 1.5], [140.0, 25.0, 1.5]],
        )
        .expect("preset scene is valid")
    }

    pub fn contains_ue(&self, p: &Point3) -> bool {
        (0..3).all(|k| p[k] >= self.ue_region[0][k] && p[k] <= self.ue_region[1][k])
    }

    /// Nearest point of the UE region; reported locations with error are clamped with this.
    pub fn clamp_to_region(&self, p: &Point3) -> Point3 {
        let mut q = *p;
        for k in 0..3 {
            q[k] = q[k].clamp(self.ue_region[0][k], self.ue_region[1][k]);
        }
        q
    }

    fn blocked(&self, from: &Point3, to: &Point3, skip: Option<usize>) -> bool {
        self.reflectors
            .iter()
            .enumerate()
            .any(|(i, r)| Some(i) != skip && r.blocks(from, to))
    }

    fn path_gain(&self, length: f64, loss_db: f64) -> Complex<f64> {
        let mag = self.wavelength / (4.0 * PI * length) * 10f64.powf(-loss_db / 20.0);
        let phase = -2.0 * PI * (length / self.wavelength).fract();
        Complex::from_polar(mag, phase)
    }
}

/// Line-of-sight plus single-bounce specular paths between the BS and `ue`.
///
/// The LoS path comes first when unobstructed, then one path per reflector in
/// scene order whose specular point lies on it and whose legs are unobstructed.
/// Both arrays use the global axes as their local frame.
pub fn generate_scene_paths(scene: &Scene, ue: &Point3) -> Result<PathSet, SceneError> {
    if !scene.contains_ue(ue) {
        return Err(SceneError::OutsideRegion(*ue));
    }
    let bs = scene.bs_position;
    let mut paths = Vec::new();
    if !scene.blocked(&bs, ue, None) {
        let d = distance(&bs, ue);
        paths.push(Path {
            gain: scene.path_gain(d, 0.0),
            aod: AnglePair::from_direction(sub(ue, &bs)),
            aoa: AnglePair::from_direction(sub(&bs, ue)),
        });
    }
    for (i, r) in scene.reflectors.iter().enumerate() {
        if !r.on_reflective_side(&bs) || !r.on_reflective_side(ue) {
            continue;
        }
        let image = r.mirror(&bs);
        let k = r.axis.index();
        let t = (r.offset - image[k]) / (ue[k] - image[k]);
        let hit = lerp(&image, ue, t);
        if !r.contains_in_plane(&hit) {
            continue;
        }
        if scene.blocked(&bs, &hit, Some(i)) || scene.blocked(&hit, ue, Some(i)) {
            continue;
        }
        let d = distance(&image, ue);
        paths.push(Path {
            gain: scene.path_gain(d, r.loss_db),
            aod: AnglePair::from_direction(sub(&hit, &bs)),
            aoa: AnglePair::from_direction(sub(&hit, ue)),
        });
    }
    Ok(PathSet::new(*ue, paths))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_scene(reflectors: Vec<Reflector>) -> Scene {
        Scene::new([0.0, 0.0, 10.0], reflectors, 0.01, [[10.0, -10.0, 0.0], [50.0, 10.0, 5.0]]).unwrap()
    }

    #[test]
    fn free_space_single_path() {
        let s = open_scene(vec![]);
        let p = generate_scene_paths(&s, &[30.0, 2.0, 1.0]).unwrap();
        assert_eq!(p.len(), 1);
        let d = distance(&[0.0, 0.0, 10.0], &[30.0, 2.0, 1.0]);
        assert!((p.paths[0].gain.norm() - 0.01 / (4.0 * PI * d)).abs() < 1e-18);
    }

    #[test]
    fn outside_region_is_rejected() {
        let s = open_scene(vec![]);
        assert!(matches!(
            generate_scene_paths(&s, &[0.0, 0.0, 0.0]),
            Err(SceneError::OutsideRegion(_))
        ));
    }

    #[test]
    fn blocker_removes_los() {
        let s = open_scene(vec![Reflector {
            name: "slab".into(),
            axis: Axis::X,
            offset: 20.0,
            extent: [[-5.0, 5.0], [0.0, 20.0]],
            facing: -1.0,
            loss_db: 3.0,
        }]);
        let p = generate_scene_paths(&s, &[30.0, 0.0, 1.0]).unwrap();
        // LoS is blocked and the UE is behind the reflective face.
        assert!(p.is_empty());
    }

    #[test]
    fn preset_has_multipath() {
        let s = Scene::urban_canyon();
        let p = generate_scene_paths(&s, &[90.0, 0.0, 1.5]).unwrap();
        assert!(p.len() >= 4, "got {} paths", p.len());
        assert!(p.paths.iter().all(|q| q.aod.is_valid() && q.aoa.is_valid()));
    }
}
