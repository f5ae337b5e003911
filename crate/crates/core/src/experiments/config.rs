use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::arrays::{AngleGrid, Scene, UpaGeometry};
use crate::hybrid::SystemDims;

/// Beamforming schemes an experiment can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Optimal,
    Cam,
    Bim,
    Ls,
    Omp,
    Location,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Optimal,
        Method::Cam,
        Method::Bim,
        Method::Ls,
        Method::Omp,
        Method::Location,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Optimal => "optimal",
            Method::Cam => "cam",
            Method::Bim => "bim",
            Method::Ls => "ls",
            Method::Omp => "omp",
            Method::Location => "location",
        }
    }

    /// Stable id used in seed derivation.
    pub fn id(self) -> u64 {
        Method::ALL.iter().position(|m| *m == self).expect("listed") as u64
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// Experiment description, read from TOML. See `docs/config.md`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub trials: usize,
    /// Symbols per coherence block, `N`.
    pub block_length: usize,
    /// Transmit SNR `P / sigma^2` in dB.
    pub snr_db: f64,
    pub methods: Vec<Method>,
    /// Mean of the Rayleigh-distributed location error, meters.
    #[serde(default)]
    pub location_error_m: f64,
    /// When false, all training observations are noiseless.
    #[serde(default = "default_true")]
    pub noisy_training: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub arrays: ArrayConfig,
    #[serde(default)]
    pub scene: SceneConfig,
    #[serde(default)]
    pub ckm: CkmConfig,
    #[serde(default)]
    pub omp: OmpConfig,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    /// BS array sizes `[n_z, n_y]`, one experiment point each.
    pub tx: Vec<[usize; 2]>,
    /// UE array `[n_z, n_y]`.
    pub rx: [usize; 2],
    pub m_t_rf: usize,
    pub m_r_rf: usize,
    /// DFT codebook oversampling per axis.
    #[serde(default = "one")]
    pub oversampling: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub preset: String,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            preset: "urban_canyon".into(),
        }
    }
}

impl SceneConfig {
    pub fn build(&self) -> Result<Scene, ExperimentError> {
        match self.preset.as_str() {
            "urban_canyon" => Ok(Scene::urban_canyon()),
            other => Err(ExperimentError::invalid("scene.preset", format!("unknown preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CkmConfig {
    /// Candidate angle tuples per CAM query, `L^`.
    pub l_hat: usize,
    /// BIM candidate transmit beams `|F^|`.
    pub tx_candidates: usize,
    /// BIM candidate receive beams `|W^|`.
    pub rx_candidates: usize,
    /// Neighbors pooled per query.
    pub k: usize,
    /// Map sample locations.
    pub samples: usize,
    /// CAM grid `[zenith points, azimuth points]`, both sides.
    pub grid: [usize; 2],
}

impl Default for CkmConfig {
    fn default() -> Self {
        Self {
            l_hat: 40,
            tx_candidates: 20,
            rx_candidates: 10,
            k: 3,
            samples: 3700,
            grid: [180, 360],
        }
    }
}

impl CkmConfig {
    pub fn angle_grid(&self) -> AngleGrid {
        AngleGrid::uniform(self.grid[0], self.grid[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OmpConfig {
    /// Iterations, `L`.
    pub sparsity: usize,
    /// Measurement symbols; default `4 ceil(L ln|dictionary| / M_r^RF)`.
    pub measurements: Option<usize>,
    /// Grid points per array dimension and axis: `os n_z` zeniths, `2 os n_y` azimuths.
    pub grid_oversampling: usize,
}

impl Default for OmpConfig {
    fn default() -> Self {
        Self {
            sparsity: 8,
            measurements: None,
            grid_oversampling: 2,
        }
    }
}

impl OmpConfig {
    pub fn angle_grid(&self, tx: &UpaGeometry, rx: &UpaGeometry) -> AngleGrid {
        let os = self.grid_oversampling;
        AngleGrid::new(os * rx.n_z, 2 * os * rx.n_y, os * tx.n_z, 2 * os * tx.n_y)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    pub fn rx_geometry(&self) -> UpaGeometry {
        UpaGeometry::new(self.arrays.rx[0], self.arrays.rx[1])
    }

    pub fn tx_geometries(&self) -> Vec<UpaGeometry> {
        self.arrays.tx.iter().map(|t| UpaGeometry::new(t[0], t[1])).collect()
    }

    pub fn dims_for(&self, tx: &UpaGeometry) -> Result<SystemDims, ExperimentError> {
        let rx = self.rx_geometry();
        SystemDims::new(
            tx.elements(),
            rx.elements(),
            self.arrays.m_t_rf,
            self.arrays.m_r_rf,
            self.block_length,
            self.snr_linear(),
        )
        .map_err(|e| ExperimentError::invalid("arrays", e.to_string()))
    }

    /// Field-level checks beyond what parsing enforces.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let positive = |field: &'static str, v: usize| {
            if v == 0 {
                Err(ExperimentError::invalid(field, "must be positive"))
            } else {
                Ok(())
            }
        };
        positive("trials", self.trials)?;
        positive("block_length", self.block_length)?;
        positive("arrays.m_t_rf", self.arrays.m_t_rf)?;
        positive("arrays.m_r_rf", self.arrays.m_r_rf)?;
        positive("arrays.oversampling", self.arrays.oversampling)?;
        positive("ckm.l_hat", self.ckm.l_hat)?;
        positive("ckm.k", self.ckm.k)?;
        positive("ckm.samples", self.ckm.samples)?;
        positive("ckm.grid", self.ckm.grid[0].min(self.ckm.grid[1]))?;
        positive("omp.grid_oversampling", self.omp.grid_oversampling)?;
        if !self.snr_db.is_finite() {
            return Err(ExperimentError::invalid("snr_db", "must be finite"));
        }
        if !(self.location_error_m >= 0.0) || !self.location_error_m.is_finite() {
            return Err(ExperimentError::invalid("location_error_m", "must be finite and nonnegative"));
        }
        if self.methods.is_empty() {
            return Err(ExperimentError::invalid("methods", "list at least one method"));
        }
        if self.arrays.tx.is_empty() {
            return Err(ExperimentError::invalid("arrays.tx", "list at least one array"));
        }
        if self.arrays.tx.iter().chain([&self.arrays.rx]).any(|a| a[0] == 0 || a[1] == 0) {
            return Err(ExperimentError::invalid("arrays", "array sizes must be positive"));
        }
        if self.ckm.tx_candidates < self.arrays.m_t_rf {
            return Err(ExperimentError::invalid("ckm.tx_candidates", "must be at least arrays.m_t_rf"));
        }
        if self.ckm.rx_candidates < self.arrays.m_r_rf {
            return Err(ExperimentError::invalid("ckm.rx_candidates", "must be at least arrays.m_r_rf"));
        }
        for tx in self.tx_geometries() {
            self.dims_for(&tx)?;
        }
        self.scene.build()?;
        Ok(())
    }
}
