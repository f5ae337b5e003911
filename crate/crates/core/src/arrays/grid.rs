use std::f64::consts::PI;

use super::{wrap_azimuth, AnglePair, PathSet};

/// Index of a grid direction: zenith index then azimuth index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridAngle {
    pub zenith: usize,
    pub azimuth: usize,
}

/// A discrete (AoD, AoA) pair; ordering is lexicographic with the AoD first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridTuple {
    pub aod: GridAngle,
    pub aoa: GridAngle,
}

/// Receive (`i_r x j_r`) and transmit (`i_t x j_t`) angle grids.
///
/// Zenith points sit at `(i + 0.5) pi / I`, azimuth points at `2 pi j / J`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngleGrid {
    pub i_r: usize,
    pub j_r: usize,
    pub i_t: usize,
    pub j_t: usize,
}

impl AngleGrid {
    pub fn new(i_r: usize, j_r: usize, i_t: usize, j_t: usize) -> Self {
        assert!(i_r > 0 && j_r > 0 && i_t > 0 && j_t > 0, "grid sizes must be positive");
        Self { i_r, j_r, i_t, j_t }
    }

    /// Same resolution on both sides.
    pub fn uniform(i: usize, j: usize) -> Self {
        Self::new(i, j, i, j)
    }

    /// Whether the grid is at least as fine as the arrays it serves.
    pub fn covers(&self, m_t: usize, m_r: usize) -> bool {
        self.i_t * self.j_t >= m_t && self.i_r * self.j_r >= m_r
    }

    /// `|Omega| = I_r J_r I_t J_t`.
    pub fn tuple_count(&self) -> usize {
        self.i_r * self.j_r * self.i_t * self.j_t
    }

    pub fn tx_angle(&self, g: GridAngle) -> AnglePair {
        grid_angle(self.i_t, self.j_t, g)
    }

    pub fn rx_angle(&self, g: GridAngle) -> AnglePair {
        grid_angle(self.i_r, self.j_r, g)
    }

    pub fn snap_tx(&self, a: &AnglePair) -> GridAngle {
        snap(self.i_t, self.j_t, a)
    }

    pub fn snap_rx(&self, a: &AnglePair) -> GridAngle {
        snap(self.i_r, self.j_r, a)
    }

    pub fn contains_tuple(&self, t: &GridTuple) -> bool {
        t.aod.zenith < self.i_t && t.aod.azimuth < self.j_t && t.aoa.zenith < self.i_r && t.aoa.azimuth < self.j_r
    }

    /// All transmit-side grid directions, zenith-major.
    pub fn tx_angles(&self) -> Vec<GridAngle> {
        all_angles(self.i_t, self.j_t)
    }

    pub fn rx_angles(&self) -> Vec<GridAngle> {
        all_angles(self.i_r, self.j_r)
    }
}

fn all_angles(i: usize, j: usize) -> Vec<GridAngle> {
    (0..i)
        .flat_map(|z| (0..j).map(move |a| GridAngle { zenith: z, azimuth: a }))
        .collect()
}

fn grid_angle(i: usize, j: usize, g: GridAngle) -> AnglePair {
    AnglePair {
        zenith: (g.zenith as f64 + 0.5) * PI / i as f64,
        azimuth: 2.0 * PI * g.azimuth as f64 / j as f64,
    }
}

/// Nearest grid point per coordinate; ties go to the smaller index.
fn snap(i: usize, j: usize, a: &AnglePair) -> GridAngle {
    let step_z = PI / i as f64;
    let x = a.zenith / step_z - 0.5;
    let lo = x.floor().clamp(0.0, (i - 1) as f64) as usize;
    let hi = (lo + 1).min(i - 1);
    let dz = |k: usize| ((k as f64 + 0.5) * step_z - a.zenith).abs();
    let zenith = if dz(hi) < dz(lo) { hi } else { lo };

    let step_a = 2.0 * PI / j as f64;
    let az = wrap_azimuth(a.azimuth);
    let lo = ((az / step_a).floor() as usize).min(j - 1);
    let hi = (lo + 1) % j;
    let da = |k: usize| {
        let d = (k as f64 * step_a - az).abs();
        d.min(2.0 * PI - d)
    };
    let (first, second) = if lo < hi { (lo, hi) } else { (hi, lo) };
    let azimuth = if da(second) < da(first) { second } else { first };
    GridAngle { zenith, azimuth }
}

/// Replaces every path direction by its nearest grid direction; gains are untouched.
pub fn nearest_grid_angles(grid: &AngleGrid, paths: &PathSet) -> PathSet {
    PathSet {
        location: paths.location,
        paths: paths
            .paths
            .iter()
            .map(|p| super::Path {
                gain: p.gain,
                aoa: grid.rx_angle(grid.snap_rx(&p.aoa)),
                aod: grid.tx_angle(grid.snap_tx(&p.aod)),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn on_grid_is_fixed_point() {
        let g = AngleGrid::uniform(7, 9);
        for a in g.tx_angles() {
            assert_eq!(g.snap_tx(&g.tx_angle(a)), a);
        }
    }

    #[test]
    fn azimuth_wraps_to_zero() {
        let g = AngleGrid::uniform(4, 8);
        let s = g.snap_rx(&AnglePair {
            zenith: 1.0,
            azimuth: 2.0 * PI - 1e-9,
        });
        assert_eq!(s.azimuth, 0);
    }

    #[test]
    fn zenith_extremes_clamp() {
        let g = AngleGrid::uniform(4, 8);
        assert_eq!(g.snap_tx(&AnglePair { zenith: 0.0, azimuth: 0.0 }).zenith, 0);
        assert_eq!(g.snap_tx(&AnglePair { zenith: PI, azimuth: 0.0 }).zenith, 3);
    }
}
