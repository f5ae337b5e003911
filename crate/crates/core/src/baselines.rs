//! Reference schemes without a channel knowledge map: full LS estimation,
//! grid OMP and LoS geometry beam alignment.

use thiserror::Error;

use crate::arrays::{steering_vector, AngleGrid, AnglePair, GridAngle, Point3, UpaGeometry};
use crate::bim::{beamformers_from_sweep, sweep, BimError, SubmatrixSelection};
use crate::codebooks::Codebook;
use crate::experiments::Method;
use crate::hybrid::{HybridBeamformer, HybridError, SystemDims};
use crate::numerics::{ComplexMatrix, LinalgError, QrFactorization};
use crate::random::{complex_gaussian, random_phase_vector, unitary_dft, SimRng};
use crate::{CMat, C64};

/// Atom count above which the OMP dictionary is refused.
pub const OMP_ATOM_LIMIT: usize = 1 << 22;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("LS sounding needs M_r^RF ({m_r_rf}) to divide M_r ({m_r})")]
    LsGroups { m_r: usize, m_r_rf: usize },
    #[error("OMP dictionary has {atoms} atoms, above the limit of {limit}; use a coarser grid")]
    DictionaryTooLarge { atoms: usize, limit: usize },
    #[error("OMP needs at least as many measurements as the sparsity ({sparsity}), got {measurements}")]
    TooFewMeasurements { sparsity: usize, measurements: usize },
    #[error("base station and reported UE position coincide")]
    CoincidentPositions,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
    #[error(transparent)]
    Bim(#[from] BimError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineOutcome {
    /// Estimated channel, to be turned into beamformers by the caller.
    Channel(CMat),
    /// Beamformer designed directly.
    Beams(HybridBeamformer<f64>),
    /// Training does not fit in the block; the block carries no data.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub method: Method,
    pub n_tr: usize,
    pub outcome: BaselineOutcome,
}

/// `ceil(M_t M_r / M_r^RF)`.
pub fn ls_symbols(dims: &SystemDims) -> usize {
    (dims.m_t * dims.m_r).div_ceil(dims.m_r_rf)
}

/// Full-dimensional LS estimate. Every unitary-DFT transmit direction is sent
/// once per group of `M_r^RF` columns of a unitary-DFT receive bank, so all
/// `M_t M_r` channel coefficients are observed; `H = W Z D^H / sqrt(P)`.
pub fn ls_full_estimate(h: &CMat, dims: &SystemDims, rng: Option<&mut SimRng>) -> Result<BaselineResult, BaselineError> {
    if !dims.m_r.is_multiple_of(dims.m_r_rf) {
        return Err(BaselineError::LsGroups {
            m_r: dims.m_r,
            m_r_rf: dims.m_r_rf,
        });
    }
    let n_tr = ls_symbols(dims);
    if n_tr > dims.n {
        return Ok(BaselineResult {
            method: Method::Ls,
            n_tr,
            outcome: BaselineOutcome::Infeasible,
        });
    }
    let d = unitary_dft(dims.m_t);
    let w = unitary_dft(dims.m_r);
    let sp = dims.snr.sqrt();
    let mut z = w.adjoint().matmul(h)?.matmul(&d)?.scale_real(sp);
    if let Some(r) = rng {
        let w_h = w.adjoint();
        for k in 0..dims.m_t {
            for g in 0..dims.m_r / dims.m_r_rf {
                let n: Vec<C64> = (0..dims.m_r).map(|_| complex_gaussian(r)).collect();
                for row in g * dims.m_r_rf..(g + 1) * dims.m_r_rf {
                    let v: C64 = w_h.row(row).iter().zip(&n).map(|(a, b)| a * b).sum();
                    z[(row, k)] += v;
                }
            }
        }
    }
    let h_hat = w.matmul(&z)?.matmul(&d.adjoint())?.scale_real(1.0 / sp);
    Ok(BaselineResult {
        method: Method::Ls,
        n_tr,
        outcome: BaselineOutcome::Channel(h_hat),
    })
}

/// Grid directions with `cos(azimuth) >= 0`. A UPA in the y-z plane responds
/// identically to `phi` and `pi - phi`, so the other half only duplicates atoms.
pub fn front_half_angles(i: usize, j: usize) -> Vec<GridAngle> {
    (0..i)
        .flat_map(|z| {
            (0..j)
                .filter(move |a| 4 * a <= j || 4 * a >= 3 * j)
                .map(move |a| GridAngle { zenith: z, azimuth: a })
        })
        .collect()
}

/// Dictionary size `|tx atoms| * |rx atoms|` for [`omp_grid_estimate`].
pub fn omp_dictionary_size(grid: &AngleGrid) -> usize {
    front_half_angles(grid.i_t, grid.j_t).len() * front_half_angles(grid.i_r, grid.j_r).len()
}

/// `4 ceil(L ln|dictionary| / M_r^RF)` measurement symbols.
pub fn default_omp_measurements(sparsity: usize, dictionary: usize, m_r_rf: usize) -> usize {
    let x = sparsity as f64 * (dictionary.max(2) as f64).ln() / m_r_rf as f64;
    4 * (x.ceil() as usize).max(1)
}

/// OMP outcome plus its per-iteration residual norms.
#[derive(Debug, Clone)]
pub struct OmpResult {
    pub result: BaselineResult,
    /// Selected (tx, rx) grid directions in selection order.
    pub support: Vec<(GridAngle, GridAngle)>,
    /// Residual norm before the first and after every iteration.
    pub residuals: Vec<f64>,
}

/// Grid OMP with random constant-modulus training.
///
/// Symbol `m` sends one random unit-norm beam `f_m` and combines with `M_r^RF`
/// random beams `W_m`. The dictionary is every (tx, rx) front-half grid pair;
/// correlations are computed in factored form, so the full dictionary is never
/// stored. Runs exactly `sparsity` iterations with an LS refit after each.
#[allow(clippy::too_many_arguments)]
pub fn omp_grid_estimate(
    h: &CMat,
    grid: &AngleGrid,
    tx: &UpaGeometry,
    rx: &UpaGeometry,
    sparsity: usize,
    measurements: usize,
    dims: &SystemDims,
    rng: &mut SimRng,
    noisy: bool,
) -> Result<OmpResult, BaselineError> {
    if measurements < sparsity {
        return Err(BaselineError::TooFewMeasurements { sparsity, measurements });
    }
    let tx_angles = front_half_angles(grid.i_t, grid.j_t);
    let rx_angles = front_half_angles(grid.i_r, grid.j_r);
    let atoms = tx_angles.len() * rx_angles.len();
    if atoms > OMP_ATOM_LIMIT {
        return Err(BaselineError::DictionaryTooLarge {
            atoms,
            limit: OMP_ATOM_LIMIT,
        });
    }
    let m_s = dims.m_s;
    let k = dims.m_r_rf;
    let n_tr = measurements.div_ceil(m_s) * m_s;
    let sp = dims.snr.sqrt();

    // Training beams and observations, row (m, q) at m * k + q.
    let f = ComplexMatrix::from_columns(&(0..n_tr).map(|_| random_phase_vector(dims.m_t, rng)).collect::<Vec<_>>())?;
    let w_cols: Vec<Vec<C64>> = (0..n_tr * k).map(|_| random_phase_vector(dims.m_r, rng)).collect();
    let w = ComplexMatrix::from_columns(&w_cols)?;
    let hf = h.matmul(&f)?;
    let mut y = vec![C64::new(0.0, 0.0); n_tr * k];
    for m in 0..n_tr {
        let x = hf.column(m);
        let noise: Vec<C64> = if noisy {
            (0..dims.m_r).map(|_| complex_gaussian(rng)).collect()
        } else {
            Vec::new()
        };
        for q in 0..k {
            let wc = &w_cols[m * k + q];
            let mut v: C64 = wc.iter().zip(&x).map(|(a, b)| a.conj() * b).sum::<C64>() * sp;
            if noisy {
                v += wc.iter().zip(&noise).map(|(a, b)| a.conj() * b).sum::<C64>();
            }
            y[m * k + q] = v;
        }
    }

    let empty = |residuals| OmpResult {
        result: BaselineResult {
            method: Method::Omp,
            n_tr,
            outcome: BaselineOutcome::Channel(ComplexMatrix::zeros(dims.m_r, dims.m_t)),
        },
        support: Vec::new(),
        residuals,
    };
    let norm = |v: &[C64]| v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if sparsity == 0 {
        return Ok(empty(vec![norm(&y)]));
    }

    // C[m, t] = a_t^H f_m, B[(m, q), r] = w_(m,q)^H a_r.
    let a_t: Vec<Vec<C64>> = tx_angles.iter().map(|g| steering_vector(tx, &grid.tx_angle(*g))).collect();
    let a_r: Vec<Vec<C64>> = rx_angles.iter().map(|g| steering_vector(rx, &grid.rx_angle(*g))).collect();
    let a_t_mat = ComplexMatrix::from_columns(&a_t)?;
    let a_r_mat = ComplexMatrix::from_columns(&a_r)?;
    let c = f.adjoint().matmul(&a_t_mat)?.conj();
    let b = w.adjoint().matmul(&a_r_mat)?;
    let c_pow = c.map(|v| C64::new(v.norm_sqr(), 0.0));
    let b_pow = ComplexMatrix::from_fn(n_tr, rx_angles.len(), |m, r| {
        C64::new((0..k).map(|q| b[(m * k + q, r)].norm_sqr()).sum(), 0.0)
    });
    let atom_norms = c_pow.transpose().matmul(&b_pow)?;
    let column = |t: usize, r: usize| -> Vec<C64> {
        (0..n_tr * k).map(|i| b[(i, r)] * c[(i / k, t)]).collect()
    };

    let mut support: Vec<(usize, usize)> = Vec::new();
    let mut gains: Vec<C64> = Vec::new();
    let mut residual = y.clone();
    let mut residuals = vec![norm(&y)];
    for _ in 0..sparsity {
        let p = ComplexMatrix::from_fn(n_tr, rx_angles.len(), |m, r| {
            (0..k).map(|q| b[(m * k + q, r)].conj() * residual[m * k + q]).sum()
        });
        let corr = c.adjoint().matmul(&p)?;
        let mut best: Option<(f64, usize, usize)> = None;
        for t in 0..tx_angles.len() {
            for r in 0..rx_angles.len() {
                let n = atom_norms[(t, r)].re;
                if n <= 0.0 || support.contains(&(t, r)) {
                    continue;
                }
                let s = corr[(t, r)].norm_sqr() / n;
                if best.is_none_or(|bb| s > bb.0) {
                    best = Some((s, t, r));
                }
            }
        }
        let Some((score, t, r)) = best else { break };
        if score <= 0.0 {
            break;
        }
        support.push((t, r));
        let cols: Vec<Vec<C64>> = support.iter().map(|&(t, r)| column(t, r)).collect();
        let q = ComplexMatrix::from_columns(&cols)?;
        let fit = match QrFactorization::new(&q) {
            Ok(qr) => qr.solve(&y)?.0,
            Err(LinalgError::RankDeficient { .. }) => {
                support.pop();
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let model = q.mul_vec(&fit)?;
        residual = y.iter().zip(&model).map(|(a, b)| a - b).collect();
        residuals.push(norm(&residual));
        gains = fit;
    }

    let mut h_hat = ComplexMatrix::zeros(dims.m_r, dims.m_t);
    for (&(t, r), g) in support.iter().zip(&gains) {
        let g = *g / sp;
        for i in 0..dims.m_r {
            let gi = g * a_r[r][i];
            for j in 0..dims.m_t {
                h_hat[(i, j)] += gi * a_t[t][j].conj();
            }
        }
    }
    Ok(OmpResult {
        result: BaselineResult {
            method: Method::Omp,
            n_tr,
            outcome: BaselineOutcome::Channel(h_hat),
        },
        support: support.iter().map(|&(t, r)| (tx_angles[t], rx_angles[r])).collect(),
        residuals,
    })
}

/// Codebook beams sorted by `|beam^H a(angle)|`, strongest first, ties by index.
pub fn beams_toward(cb: &Codebook<f64>, angle: &AnglePair, count: usize) -> Vec<usize> {
    let resp = cb.responses(angle);
    let mut idx: Vec<usize> = (0..cb.len()).collect();
    idx.sort_by(|&a, &b| resp[b].norm_sqr().total_cmp(&resp[a].norm_sqr()).then(a.cmp(&b)));
    idx.truncate(count);
    idx
}

/// LoS AoD at the BS and AoA at the UE implied by the two positions.
pub fn los_angles(bs: &Point3, ue: &Point3) -> Result<(AnglePair, AnglePair), BaselineError> {
    let d = [ue[0] - bs[0], ue[1] - bs[1], ue[2] - bs[2]];
    if d.iter().all(|v| *v == 0.0) {
        return Err(BaselineError::CoincidentPositions);
    }
    Ok((
        AnglePair::from_direction(d),
        AnglePair::from_direction([-d[0], -d[1], -d[2]]),
    ))
}

/// Beams aimed at the reported position, then one pilot sweep over exactly
/// those beams to fit the digital stage.
#[allow(clippy::too_many_arguments)]
pub fn location_based_beams(
    h: &CMat,
    bs: &Point3,
    ue_reported: &Point3,
    f: &Codebook<f64>,
    w: &Codebook<f64>,
    dims: &SystemDims,
    rng: Option<&mut SimRng>,
) -> Result<BaselineResult, BaselineError> {
    let (aod, aoa) = los_angles(bs, ue_reported)?;
    let tx = beams_toward(f, &aod, dims.m_t_rf);
    let rx = beams_toward(w, &aoa, dims.m_r_rf);
    let f_hat = f.matrix(&tx).map_err(HybridError::from)?;
    let w_hat = w.matrix(&rx).map_err(HybridError::from)?;
    let meas = sweep(h, &f_hat, &w_hat, dims, rng)?;
    let sel = SubmatrixSelection {
        rows: (0..rx.len()).collect(),
        cols: (0..tx.len()).collect(),
        values: meas.y_tilde.clone(),
    };
    let (bf, _) = beamformers_from_sweep(&meas, &sel, &f_hat, &w_hat, dims.snr)?;
    Ok(BaselineResult {
        method: Method::Location,
        n_tr: meas.n_tr,
        outcome: BaselineOutcome::Beams(bf),
    })
}
