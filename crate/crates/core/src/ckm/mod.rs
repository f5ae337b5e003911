//! Channel knowledge maps: channel angle maps (CAM) and beam index maps (BIM).
//!
//! Both are built from error-free sample locations and queried by k-nearest
//! neighbors with inverse-distance weighting.

mod index;
mod persist;

pub use index::{SpatialIndex, BRUTE_FORCE_LIMIT};
pub use persist::FORMAT_VERSION;

use std::collections::HashMap;

use thiserror::Error;

use crate::arrays::{AngleGrid, GridTuple, PathSet, Point3};

#[derive(Debug, Error)]
pub enum CkmError {
    #[error("the map has no samples")]
    Empty,
    #[error("the map holds no {0} records")]
    MissingKind(&'static str),
    #[error("neighbor count must be at least 1")]
    ZeroNeighbors,
    #[error("duplicate sample location {0:?}")]
    DuplicateLocation(Point3),
    #[error("sample {sample}: duplicate beam index {index}")]
    DuplicateBeam { sample: usize, index: usize },
    #[error("sample {sample}: candidate tuple outside the angle grid")]
    OffGrid { sample: usize },
    #[error("unsupported format version `{0}`")]
    Version(String),
    #[error("codebook fingerprint mismatch: file has `{found}`, expected `{expected}`")]
    Fingerprint { expected: String, found: String },
    #[error("file is truncated: {0}")]
    Truncated(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One candidate path direction pair with its power weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CamCandidate {
    pub tuple: GridTuple,
    pub weight: f64,
}

/// Candidate angle tuples at one location, strongest first.
#[derive(Debug, Clone, PartialEq)]
pub struct CamEntry {
    pub location: Point3,
    pub candidates: Vec<CamCandidate>,
}

impl CamEntry {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn tuples(&self) -> Vec<GridTuple> {
        self.candidates.iter().map(|c| c.tuple).collect()
    }
}

/// Ranked candidate beam indices at one location.
#[derive(Debug, Clone, PartialEq)]
pub struct BimEntry {
    pub location: Point3,
    pub tx_beams: Vec<usize>,
    pub rx_beams: Vec<usize>,
}

/// Result of a BIM query; `shortfall` is set when fewer beams than requested were available.
#[derive(Debug, Clone, PartialEq)]
pub struct BimQuery {
    pub entry: BimEntry,
    pub shortfall: bool,
}

/// Sort key: weight descending, then the tie-break key ascending.
fn rank_desc<K: Ord + Copy>(items: &mut [(K, f64)]) {
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// Snaps paths to the grid, merges coinciding tuples by summed power and keeps the `l_max` strongest.
pub fn build_cam_samples(paths: &[PathSet], grid: &AngleGrid, l_max: usize) -> Vec<CamEntry> {
    paths
        .iter()
        .map(|set| {
            let mut merged: HashMap<GridTuple, f64> = HashMap::new();
            for p in &set.paths {
                let tuple = GridTuple {
                    aod: grid.snap_tx(&p.aod),
                    aoa: grid.snap_rx(&p.aoa),
                };
                *merged.entry(tuple).or_insert(0.0) += p.gain.norm_sqr();
            }
            let mut items: Vec<(GridTuple, f64)> = merged.into_iter().collect();
            rank_desc(&mut items);
            items.truncate(l_max);
            CamEntry {
                location: set.location,
                candidates: items
                    .into_iter()
                    .map(|(tuple, weight)| CamCandidate { tuple, weight })
                    .collect(),
            }
        })
        .collect()
}

/// Per-location ranked beam lists, truncated to the configured maxima.
pub fn build_bim_samples(
    ranked: &[(Point3, Vec<usize>, Vec<usize>)],
    tx_max: usize,
    rx_max: usize,
) -> Result<Vec<BimEntry>, CkmError> {
    let mut out = Vec::with_capacity(ranked.len());
    for (sample, (loc, tx, rx)) in ranked.iter().enumerate() {
        for list in [tx, rx] {
            let mut seen = std::collections::HashSet::new();
            if let Some(&index) = list.iter().find(|i| !seen.insert(**i)) {
                return Err(CkmError::DuplicateBeam { sample, index });
            }
        }
        out.push(BimEntry {
            location: *loc,
            tx_beams: tx.iter().copied().take(tx_max).collect(),
            rx_beams: rx.iter().copied().take(rx_max).collect(),
        });
    }
    check_distinct(out.iter().map(|e| e.location))?;
    Ok(out)
}

fn check_distinct(locs: impl Iterator<Item = Point3>) -> Result<(), CkmError> {
    let mut seen = std::collections::HashSet::new();
    for l in locs {
        if !seen.insert(l.map(f64::to_bits)) {
            return Err(CkmError::DuplicateLocation(l));
        }
    }
    Ok(())
}

/// CAM and/or BIM samples with their spatial indexes.
#[derive(Debug, Clone)]
pub struct CkmDatabase {
    k: usize,
    grid: Option<AngleGrid>,
    /// Transmit and receive codebook fingerprints the BIM indices refer to.
    codebooks: Option<(String, String)>,
    cam: Vec<CamEntry>,
    bim: Vec<BimEntry>,
    cam_index: SpatialIndex,
    bim_index: SpatialIndex,
}

impl CkmDatabase {
    /// Empty map with neighbor count `k`.
    pub fn new(k: usize) -> Result<Self, CkmError> {
        if k == 0 {
            return Err(CkmError::ZeroNeighbors);
        }
        Ok(Self {
            k,
            grid: None,
            codebooks: None,
            cam: Vec::new(),
            bim: Vec::new(),
            cam_index: SpatialIndex::new(Vec::new()),
            bim_index: SpatialIndex::new(Vec::new()),
        })
    }

    pub fn with_cam(mut self, grid: AngleGrid, entries: Vec<CamEntry>) -> Result<Self, CkmError> {
        check_distinct(entries.iter().map(|e| e.location))?;
        for (sample, e) in entries.iter().enumerate() {
            if e.candidates.iter().any(|c| !grid.contains_tuple(&c.tuple)) {
                return Err(CkmError::OffGrid { sample });
            }
        }
        self.cam_index = SpatialIndex::new(entries.iter().map(|e| e.location).collect());
        self.grid = Some(grid);
        self.cam = entries;
        Ok(self)
    }

    pub fn with_bim(mut self, tx_fingerprint: &str, rx_fingerprint: &str, entries: Vec<BimEntry>) -> Result<Self, CkmError> {
        check_distinct(entries.iter().map(|e| e.location))?;
        self.bim_index = SpatialIndex::new(entries.iter().map(|e| e.location).collect());
        self.codebooks = Some((tx_fingerprint.to_string(), rx_fingerprint.to_string()));
        self.bim = entries;
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn grid(&self) -> Option<&AngleGrid> {
        self.grid.as_ref()
    }

    pub fn codebook_fingerprints(&self) -> Option<(&str, &str)> {
        self.codebooks.as_ref().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn cam_entries(&self) -> &[CamEntry] {
        &self.cam
    }

    pub fn bim_entries(&self) -> &[BimEntry] {
        &self.bim
    }

    pub fn is_empty(&self) -> bool {
        self.cam.is_empty() && self.bim.is_empty()
    }

    /// Nearest CAM samples as `(index, distance)`.
    pub fn cam_neighbors(&self, q: &Point3, k: usize) -> Vec<(usize, f64)> {
        self.cam_index.knn(q, k)
    }

    pub fn bim_neighbors(&self, q: &Point3, k: usize) -> Vec<(usize, f64)> {
        self.bim_index.knn(q, k)
    }
}

/// KNN/IDW candidate pooling for a reported location `q`.
///
/// Each neighbor's weights are scaled by `1/d`, coinciding tuples are summed and
/// the `l_hat` heaviest tuples returned (ties by tuple order). A neighbor at
/// distance zero is returned as-is, truncated.
pub fn query_cam(db: &CkmDatabase, q: &Point3, l_hat: usize, k: usize) -> Result<CamEntry, CkmError> {
    if db.cam.is_empty() {
        return Err(if db.is_empty() { CkmError::Empty } else { CkmError::MissingKind("CAM") });
    }
    if k == 0 {
        return Err(CkmError::ZeroNeighbors);
    }
    let hits = db.cam_index.knn(q, k);
    if let Some(&(i, _)) = hits.iter().find(|h| h.1 == 0.0) {
        let e = &db.cam[i];
        return Ok(CamEntry {
            location: *q,
            candidates: e.candidates.iter().copied().take(l_hat).collect(),
        });
    }
    let mut pooled: HashMap<GridTuple, f64> = HashMap::new();
    for &(i, d) in &hits {
        for c in &db.cam[i].candidates {
            *pooled.entry(c.tuple).or_insert(0.0) += c.weight / d;
        }
    }
    let mut items: Vec<(GridTuple, f64)> = pooled.into_iter().collect();
    rank_desc(&mut items);
    items.truncate(l_hat);
    Ok(CamEntry {
        location: *q,
        candidates: items
            .into_iter()
            .map(|(tuple, weight)| CamCandidate { tuple, weight })
            .collect(),
    })
}

fn borda(lists: &[(&[usize], f64)], keep: usize) -> Vec<usize> {
    let mut score: HashMap<usize, f64> = HashMap::new();
    for (list, d) in lists {
        let len = list.len() as f64;
        for (rank, &b) in list.iter().enumerate() {
            *score.entry(b).or_insert(0.0) += (len - rank as f64) / d;
        }
    }
    let mut items: Vec<(usize, f64)> = score.into_iter().collect();
    rank_desc(&mut items);
    items.into_iter().take(keep).map(|(b, _)| b).collect()
}

/// Rank-discounted pooling of neighbor beam lists for a reported location `q`.
///
/// A neighbor's beam at rank `r` in a list of length `n` scores `(n - r)/d`;
/// scores are summed per beam and the top `sizes.0` tx / `sizes.1` rx beams kept
/// (ties to the smaller index).
pub fn query_bim(db: &CkmDatabase, q: &Point3, sizes: (usize, usize), k: usize) -> Result<BimQuery, CkmError> {
    if db.bim.is_empty() {
        return Err(if db.is_empty() { CkmError::Empty } else { CkmError::MissingKind("BIM") });
    }
    if k == 0 {
        return Err(CkmError::ZeroNeighbors);
    }
    let hits = db.bim_index.knn(q, k);
    let (tx, rx) = if let Some(&(i, _)) = hits.iter().find(|h| h.1 == 0.0) {
        let e = &db.bim[i];
        (
            e.tx_beams.iter().copied().take(sizes.0).collect::<Vec<_>>(),
            e.rx_beams.iter().copied().take(sizes.1).collect::<Vec<_>>(),
        )
    } else {
        let tx_lists: Vec<(&[usize], f64)> = hits.iter().map(|&(i, d)| (db.bim[i].tx_beams.as_slice(), d)).collect();
        let rx_lists: Vec<(&[usize], f64)> = hits.iter().map(|&(i, d)| (db.bim[i].rx_beams.as_slice(), d)).collect();
        (borda(&tx_lists, sizes.0), borda(&rx_lists, sizes.1))
    };
    let shortfall = tx.len() < sizes.0 || rx.len() < sizes.1;
    Ok(BimQuery {
        entry: BimEntry {
            location: *q,
            tx_beams: tx,
            rx_beams: rx,
        },
        shortfall,
    })
}
