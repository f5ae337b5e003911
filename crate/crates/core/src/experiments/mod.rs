//! Monte-Carlo experiments: maps, trial pipelines per method, CSV output and summaries.

mod config;

pub use config::{ArrayConfig, CkmConfig, ExperimentConfig, Method, OmpConfig, SceneConfig};

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::arrays::{generate_scene_paths, synthesize_channel, PathSet, Point3, Scene, SceneError, UpaGeometry};
use crate::baselines::{
    default_omp_measurements, location_based_beams, ls_full_estimate, omp_dictionary_size, omp_grid_estimate,
    BaselineError, BaselineOutcome, BaselineResult,
};
use crate::bim::{beamformers_from_sweep, rank_beams, select_submatrix_greedy, sweep, BimError};
use crate::cam::{
    estimate_gains, merge_array_aliases, plan_training, reconstruct_channel, simulate_training, CamError, CandidateSet,
};
use crate::ckm::{build_bim_samples, build_cam_samples, query_bim, query_cam, CkmDatabase, CkmError};
use crate::codebooks::{beam_pair_gains, Codebook, CodebookError};
use crate::design::design_from_channel;
use crate::hybrid::{achieved_rate, pre_log, HybridBeamformer, HybridError, SystemDims};
use crate::random::{derive_seed, rng_from_seed, SimRng};
use crate::CMat;

/// Seed stream for map sample locations.
const MAP_STREAM: u64 = 0x6d61_7073;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("config parse error: {0}")]
    Config(String),
    #[error("{method} failed at M_t = {m_t}, trial {trial}: {source}")]
    Trial {
        method: Method,
        m_t: usize,
        trial: usize,
        #[source]
        source: Box<ExperimentError>,
    },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Ckm(#[from] CkmError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
    #[error(transparent)]
    Cam(#[from] CamError),
    #[error(transparent)]
    Bim(#[from] BimError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl ExperimentError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Self::Invalid {
            field,
            reason: reason.into(),
        }
    }
}

/// Rayleigh scale giving mean `mean_m`: `s = mean / sqrt(pi / 2)`.
pub fn rayleigh_scale(mean_m: f64) -> f64 {
    mean_m / std::f64::consts::FRAC_PI_2.sqrt()
}

/// Horizontal offset with Rayleigh magnitude of mean `mean_m` and uniform direction.
pub fn draw_location_error<R: Rng + ?Sized>(mean_m: f64, rng: &mut R) -> Point3 {
    // Both uniforms are drawn even for zero mean so streams line up across settings.
    let u: f64 = rng.random();
    let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    let r = rayleigh_scale(mean_m) * (-2.0 * (1.0 - u).ln()).sqrt();
    [r * theta.cos(), r * theta.sin(), 0.0]
}

/// Uniform sample locations in the UE region.
pub fn sample_locations(scene: &Scene, count: usize, seed: u64) -> Vec<Point3> {
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| uniform_in_region(scene, &mut rng)).collect()
}

fn uniform_in_region(scene: &Scene, rng: &mut SimRng) -> Point3 {
    let [lo, hi] = scene.ue_region;
    let mut p = [0.0; 3];
    for k in 0..3 {
        p[k] = if hi[k] > lo[k] { rng.random_range(lo[k]..hi[k]) } else { lo[k] };
    }
    p
}

pub fn scene_paths(scene: &Scene, locations: &[Point3]) -> Result<Vec<PathSet>, SceneError> {
    locations.par_iter().map(|p| generate_scene_paths(scene, p)).collect()
}

/// CAM built from path sets; each sample keeps up to `l_max` tuples.
pub fn build_cam_map(paths: &[PathSet], cfg: &CkmConfig) -> Result<CkmDatabase, CkmError> {
    let entries = build_cam_samples(paths, &cfg.angle_grid(), cfg.l_hat);
    CkmDatabase::new(cfg.k)?.with_cam(cfg.angle_grid(), entries)
}

/// BIM built from noiseless beam-pair gains of every codebook pair.
pub fn build_bim_map(
    paths: &[PathSet],
    f: &Codebook<f64>,
    w: &Codebook<f64>,
    cfg: &CkmConfig,
) -> Result<CkmDatabase, CkmError> {
    let ranked: Vec<(Point3, Vec<usize>, Vec<usize>)> = paths
        .par_iter()
        .map(|set| {
            let (tx, rx) = rank_beams(&beam_pair_gains(f, w, set));
            (set.location, tx, rx)
        })
        .collect();
    let entries = build_bim_samples(&ranked, cfg.tx_candidates, cfg.rx_candidates)?;
    CkmDatabase::new(cfg.k)?.with_bim(&f.fingerprint(), &w.fingerprint(), entries)
}

/// One (method, array, trial) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub method: Method,
    pub m_t: usize,
    pub trial: usize,
    pub raw_rate: f64,
    pub n_tr: usize,
    pub effective_rate: f64,
    pub loc_error_m: f64,
    pub seed: u64,
}

pub const CSV_HEADER: [&str; 8] = [
    "method",
    "M_t",
    "trial",
    "raw_rate_bpshz",
    "N_tr",
    "effective_rate_bpshz",
    "loc_error_m",
    "seed",
];

/// Everything a method needs for one array size.
pub struct Setup {
    pub scene: Scene,
    pub tx: UpaGeometry,
    pub rx: UpaGeometry,
    pub f: Codebook<f64>,
    pub w: Codebook<f64>,
    pub dims: SystemDims,
    pub cam: Option<CkmDatabase>,
    pub bim: Option<CkmDatabase>,
}

/// Inputs of one trial shared by all methods.
pub struct TrialInput {
    pub h: CMat,
    pub reported: Point3,
}

fn beams_rate(h: &CMat, bf: &HybridBeamformer<f64>, snr: f64) -> Result<f64, ExperimentError> {
    Ok(achieved_rate(h, bf, snr)?.max(0.0))
}

fn channel_rate(setup: &Setup, h: &CMat, h_hat: &CMat) -> Result<f64, ExperimentError> {
    if h_hat.frobenius_norm() == 0.0 {
        return Ok(0.0);
    }
    let (bf, _) = design_from_channel(h_hat, &setup.f, &setup.w, &setup.dims)?;
    beams_rate(h, &bf, setup.dims.snr)
}

/// Runs one method on one trial; returns `(raw rate, N_tr)`.
pub fn run_method(
    method: Method,
    setup: &Setup,
    input: &TrialInput,
    cfg: &ExperimentConfig,
    rng: &mut SimRng,
) -> Result<(f64, usize), ExperimentError> {
    let h = &input.h;
    let dims = &setup.dims;
    let noisy = cfg.noisy_training;
    let from_baseline = |r: BaselineResult| -> Result<(f64, usize), ExperimentError> {
        let rate = match &r.outcome {
            BaselineOutcome::Channel(h_hat) => channel_rate(setup, h, h_hat)?,
            BaselineOutcome::Beams(bf) => beams_rate(h, bf, dims.snr)?,
            BaselineOutcome::Infeasible => 0.0,
        };
        Ok((rate, r.n_tr))
    };
    match method {
        Method::Optimal => {
            let (bf, _) = design_from_channel(h, &setup.f, &setup.w, dims)?;
            Ok((beams_rate(h, &bf, dims.snr)?, 0))
        }
        Method::Cam => {
            let db = setup.cam.as_ref().ok_or(CkmError::MissingKind("CAM"))?;
            let grid = *db.grid().ok_or(CkmError::MissingKind("CAM"))?;
            let entry = merge_array_aliases(&query_cam(db, &input.reported, cfg.ckm.l_hat, cfg.ckm.k)?, &grid);
            let mut tuples = entry.tuples();
            // Drop the weakest candidate until the observation matrix is usable.
            let plan = loop {
                let cands = CandidateSet::new(tuples.clone(), &grid, &setup.tx, &setup.rx);
                match plan_training(cands, &setup.f, &setup.w, dims) {
                    Ok(p) => break p,
                    Err(CamError::RankDeficient { .. }) if tuples.len() > 1 => {
                        tuples.pop();
                    }
                    Err(e) => return Err(e.into()),
                }
            };
            let y = simulate_training(h, &plan, dims.snr, noisy.then_some(&mut *rng))?;
            let est = estimate_gains(&y, &plan, dims.snr)?;
            let h_hat = reconstruct_channel(&plan.candidates, &est.gains);
            Ok((channel_rate(setup, h, &h_hat)?, plan.symbols()))
        }
        Method::Bim => {
            let db = setup.bim.as_ref().ok_or(CkmError::MissingKind("BIM"))?;
            let q = query_bim(db, &input.reported, (cfg.ckm.tx_candidates, cfg.ckm.rx_candidates), cfg.ckm.k)?;
            let f_hat = setup.f.matrix(&q.entry.tx_beams)?;
            let w_hat = setup.w.matrix(&q.entry.rx_beams)?;
            let meas = sweep(h, &f_hat, &w_hat, dims, noisy.then_some(&mut *rng))?;
            let sel = select_submatrix_greedy(&meas.y_tilde, dims.m_t_rf, dims.m_r_rf)?;
            let (bf, _) = beamformers_from_sweep(&meas, &sel, &f_hat, &w_hat, dims.snr)?;
            Ok((beams_rate(h, &bf, dims.snr)?, meas.n_tr))
        }
        Method::Ls => from_baseline(ls_full_estimate(h, dims, noisy.then_some(&mut *rng))?),
        Method::Omp => {
            let grid = cfg.omp.angle_grid(&setup.tx, &setup.rx);
            let meas = cfg
                .omp
                .measurements
                .unwrap_or_else(|| default_omp_measurements(cfg.omp.sparsity, omp_dictionary_size(&grid), dims.m_r_rf));
            let r = omp_grid_estimate(h, &grid, &setup.tx, &setup.rx, cfg.omp.sparsity, meas, dims, rng, noisy)?;
            from_baseline(r.result)
        }
        Method::Location => from_baseline(location_based_beams(
            h,
            &setup.scene.bs_position,
            &input.reported,
            &setup.f,
            &setup.w,
            dims,
            noisy.then_some(&mut *rng),
        )?),
    }
}

/// Builds codebooks and the maps the configured methods need for one BS array.
pub fn prepare_setup(
    cfg: &ExperimentConfig,
    tx: UpaGeometry,
    map_paths: &[PathSet],
    cam: Option<&CkmDatabase>,
) -> Result<Setup, ExperimentError> {
    let scene = cfg.scene.build()?;
    let rx = cfg.rx_geometry();
    let f = Codebook::kronecker_dft(tx, cfg.arrays.oversampling)?;
    let w = Codebook::kronecker_dft(rx, cfg.arrays.oversampling)?;
    let bim = if cfg.methods.contains(&Method::Bim) {
        Some(build_bim_map(map_paths, &f, &w, &cfg.ckm)?)
    } else {
        None
    };
    Ok(Setup {
        dims: cfg.dims_for(&tx)?,
        scene,
        tx,
        rx,
        f,
        w,
        cam: cam.cloned(),
        bim,
    })
}

/// Runs every (array, trial, method) combination. Records come back ordered by
/// array, then trial, then method as listed in the config, independent of
/// thread scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<TrialRecord>, ExperimentError> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| ExperimentError::ThreadPool(e.to_string()))?;
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>, ExperimentError> {
    let scene = cfg.scene.build()?;
    let needs_map = cfg.methods.iter().any(|m| matches!(m, Method::Cam | Method::Bim));
    let map_paths = if needs_map {
        let locs = sample_locations(&scene, cfg.ckm.samples, derive_seed(cfg.master_seed, &[MAP_STREAM]));
        scene_paths(&scene, &locs)?
    } else {
        Vec::new()
    };
    let cam = if cfg.methods.contains(&Method::Cam) {
        Some(build_cam_map(&map_paths, &cfg.ckm)?)
    } else {
        None
    };

    // True and reported locations depend only on (master seed, trial).
    let trials: Vec<(Point3, Point3, f64)> = (0..cfg.trials)
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(cfg.master_seed, &[t as u64]));
            let truth = uniform_in_region(&scene, &mut rng);
            let e = draw_location_error(cfg.location_error_m, &mut rng);
            let reported = [truth[0] + e[0], truth[1] + e[1], truth[2] + e[2]];
            (truth, reported, (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt())
        })
        .collect();

    let mut records = Vec::new();
    for tx in cfg.tx_geometries() {
        let setup = prepare_setup(cfg, tx, &map_paths, cam.as_ref())?;
        let m_t = tx.elements();
        let per_trial: Vec<Result<Vec<TrialRecord>, ExperimentError>> = trials
            .par_iter()
            .enumerate()
            .map(|(trial, (truth, reported, err))| {
                let paths = generate_scene_paths(&setup.scene, truth)?;
                let input = TrialInput {
                    h: synthesize_channel(&setup.tx, &setup.rx, &paths),
                    reported: *reported,
                };
                cfg.methods
                    .iter()
                    .map(|&method| {
                        let seed = derive_seed(cfg.master_seed, &[method.id(), m_t as u64, trial as u64]);
                        let mut rng = rng_from_seed(seed);
                        let (raw_rate, n_tr) =
                            run_method(method, &setup, &input, cfg, &mut rng).map_err(|e| ExperimentError::Trial {
                                method,
                                m_t,
                                trial,
                                source: Box::new(e),
                            })?;
                        Ok(TrialRecord {
                            method,
                            m_t,
                            trial,
                            raw_rate,
                            n_tr,
                            effective_rate: raw_rate * pre_log(n_tr, cfg.block_length),
                            loc_error_m: *err,
                            seed,
                        })
                    })
                    .collect()
            })
            .collect();
        for r in per_trial {
            records.extend(r?);
        }
    }
    Ok(records)
}

/// Writes records with the fixed header; floats use a fixed 12-digit format.
pub fn write_csv<W: Write>(records: &[TrialRecord], w: W) -> Result<(), ExperimentError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in records {
        out.write_record([
            r.method.name().to_string(),
            r.m_t.to_string(),
            r.trial.to_string(),
            format!("{:.12}", r.raw_rate),
            r.n_tr.to_string(),
            format!("{:.12}", r.effective_rate),
            format!("{:.12}", r.loc_error_m),
            r.seed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Mean effective rate per (method, M_t).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub m_t: usize,
    pub trials: usize,
    pub mean_raw_rate: f64,
    pub mean_effective_rate: f64,
    /// Standard error of the mean effective rate; zero for a single trial.
    pub std_error: f64,
    pub mean_n_tr: f64,
}

/// Groups by (method, M_t) in order of first appearance.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, usize)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.method, r.m_t)) {
            keys.push((r.method, r.m_t));
        }
    }
    keys.into_iter()
        .map(|(method, m_t)| {
            let group: Vec<&TrialRecord> = records.iter().filter(|r| r.method == method && r.m_t == m_t).collect();
            let n = group.len() as f64;
            let mean = |f: &dyn Fn(&TrialRecord) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            let m_eff = mean(&|r| r.effective_rate);
            let std_error = if group.len() > 1 {
                let var = group.iter().map(|r| (r.effective_rate - m_eff).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                method,
                m_t,
                trials: group.len(),
                mean_raw_rate: mean(&|r| r.raw_rate),
                mean_effective_rate: m_eff,
                std_error,
                mean_n_tr: mean(&|r| r.n_tr as f64),
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], w: W) -> Result<(), ExperimentError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "method",
        "M_t",
        "trials",
        "mean_raw_rate_bpshz",
        "mean_effective_rate_bpshz",
        "std_error",
        "mean_N_tr",
    ])?;
    for r in rows {
        out.write_record([
            r.method.name().to_string(),
            r.m_t.to_string(),
            r.trials.to_string(),
            format!("{:.12}", r.mean_raw_rate),
            format!("{:.12}", r.mean_effective_rate),
            format!("{:.12}", r.std_error),
            format!("{:.6}", r.mean_n_tr),
        ])?;
    }
    out.flush()?;
    Ok(())
}
