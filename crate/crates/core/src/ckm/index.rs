use crate::arrays::Point3;

/// Sample count above which [`SpatialIndex::new`] switches to buckets.
pub const BRUTE_FORCE_LIMIT: usize = 10_000;

fn dist(a: &Point3, b: &Point3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Exact k-nearest-neighbor search over fixed sample points.
///
/// Results are sorted by distance, ties by insertion order, for both variants.
#[derive(Debug, Clone)]
pub enum SpatialIndex {
    BruteForce { points: Vec<Point3> },
    Buckets(BucketGrid),
}

#[derive(Debug, Clone)]
pub struct BucketGrid {
    points: Vec<Point3>,
    origin: Point3,
    cell: [f64; 3],
    cells: [usize; 3],
    buckets: Vec<Vec<usize>>,
}

impl SpatialIndex {
    /// Brute force up to [`BRUTE_FORCE_LIMIT`] points, buckets beyond.
    pub fn new(points: Vec<Point3>) -> Self {
        if points.len() <= BRUTE_FORCE_LIMIT {
            Self::BruteForce { points }
        } else {
            Self::bucketed(points)
        }
    }

    pub fn brute_force(points: Vec<Point3>) -> Self {
        Self::BruteForce { points }
    }

    pub fn bucketed(points: Vec<Point3>) -> Self {
        Self::Buckets(BucketGrid::new(points))
    }

    pub fn len(&self) -> usize {
        self.points().len()
    }

    pub fn is_empty(&self) -> bool {
        self.points().is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        match self {
            Self::BruteForce { points } => points,
            Self::Buckets(g) => &g.points,
        }
    }

    /// Up to `k` nearest samples as `(index, distance)`.
    pub fn knn(&self, q: &Point3, k: usize) -> Vec<(usize, f64)> {
        match self {
            Self::BruteForce { points } => {
                let mut all: Vec<(usize, f64)> = points.iter().enumerate().map(|(i, p)| (i, dist(q, p))).collect();
                sort_hits(&mut all);
                all.truncate(k);
                all
            }
            Self::Buckets(g) => g.knn(q, k),
        }
    }
}

fn sort_hits(hits: &mut [(usize, f64)]) {
    hits.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
}

impl BucketGrid {
    fn new(points: Vec<Point3>) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if points.is_empty() {
            lo = [0.0; 3];
            hi = [0.0; 3];
        }
        let active = (0..3).filter(|&k| hi[k] > lo[k]).count().max(1);
        // Roughly two points per bucket.
        let per_axis = ((points.len() as f64 / 2.0).powf(1.0 / active as f64).ceil() as usize).max(1);
        let mut cells = [1usize; 3];
        let mut cell = [1.0f64; 3];
        for k in 0..3 {
            if hi[k] > lo[k] {
                cells[k] = per_axis;
                cell[k] = (hi[k] - lo[k]) / per_axis as f64;
            }
        }
        let mut grid = Self {
            points,
            origin: lo,
            cell,
            cells,
            buckets: vec![Vec::new(); cells[0] * cells[1] * cells[2]],
        };
        for i in 0..grid.points.len() {
            let c = grid.cell_of(&grid.points[i]);
            let flat = grid.flat(c);
            grid.buckets[flat].push(i);
        }
        grid
    }

    fn cell_of(&self, p: &Point3) -> [usize; 3] {
        let mut c = [0usize; 3];
        for k in 0..3 {
            let x = ((p[k] - self.origin[k]) / self.cell[k]).floor();
            c[k] = x.clamp(0.0, (self.cells[k] - 1) as f64) as usize;
        }
        c
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[0] * self.cells[1] + c[1]) * self.cells[2] + c[2]
    }

    fn knn(&self, q: &Point3, k: usize) -> Vec<(usize, f64)> {
        if self.points.is_empty() || k == 0 {
            return Vec::new();
        }
        let qc = self.cell_of(q);
        let min_cell = (0..3)
            .filter(|&a| self.cells[a] > 1)
            .map(|a| self.cell[a])
            .fold(f64::INFINITY, f64::min);
        let max_ring = *self.cells.iter().max().expect("three axes");
        let mut hits: Vec<(usize, f64)> = Vec::new();
        for ring in 0..=max_ring {
            self.visit_ring(qc, ring, |i| hits.push((i, dist(q, &self.points[i]))));
            if hits.len() >= k {
                sort_hits(&mut hits);
                hits.truncate(k.max(1));
                // Any point in ring + 1 or beyond is at least `ring * min_cell` away.
                let bound = ring as f64 * min_cell;
                if hits[k - 1].1 < bound {
                    break;
                }
            }
        }
        sort_hits(&mut hits);
        hits.truncate(k);
        hits
    }

    /// Calls `f` on every point in cells at Chebyshev distance exactly `ring` from `c`.
    fn visit_ring(&self, c: [usize; 3], ring: usize, mut f: impl FnMut(usize)) {
        let r = ring as isize;
        let range = |k: usize| {
            let lo = (c[k] as isize - r).max(0);
            let hi = (c[k] as isize + r).min(self.cells[k] as isize - 1);
            lo..=hi
        };
        for x in range(0) {
            for y in range(1) {
                for z in range(2) {
                    let cheb = (x - c[0] as isize)
                        .abs()
                        .max((y - c[1] as isize).abs())
                        .max((z - c[2] as isize).abs());
                    if cheb != r {
                        continue;
                    }
                    for &i in &self.buckets[self.flat([x as usize, y as usize, z as usize])] {
                        f(i);
                    }
                }
            }
        }
    }
}
