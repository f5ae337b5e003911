//! CAM-aided light training: candidate-matched training beams, the observation
//! matrix, pilot simulation, least-squares gain estimation and reconstruction.

use std::collections::HashMap;

use num_complex::Complex;
use thiserror::Error;

use crate::arrays::{steering_vector, AngleGrid, GridAngle, GridTuple, UpaGeometry};
use crate::ckm::{CamCandidate, CamEntry};
use crate::codebooks::{Codebook, CodebookError};
use crate::hybrid::{HybridBeamformer, HybridError, SystemDims};
use crate::numerics::{condition_number, evd_hermitian, hermitian_inv_sqrt, khatri_rao, ComplexMatrix, LinalgError, QrFactorization};
use crate::random::{gaussian_matrix, unitary_dft, SimRng};
use crate::{CMat, C64};

/// Condition number of the observation matrix above which extra epochs are added.
pub const MAX_CONDITION: f64 = 1e8;
/// Extra epochs allowed for rank repair.
pub const MAX_REPAIR_EPOCHS: usize = 4;

#[derive(Debug, Error)]
pub enum CamError {
    #[error("no candidate paths to train")]
    NoCandidates,
    #[error("observation matrix stays ill-conditioned (cond {condition:e}) after {epochs} epochs")]
    RankDeficient { epochs: usize, condition: f64 },
    #[error("combiner is not semi-unitary (deviation {deviation:e}); the MSE bound does not apply")]
    HypothesisViolated { deviation: f64 },
    #[error("observation length {got} does not match the plan ({expected})")]
    ObservationLength { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
}

/// Candidate angle tuples with their array responses.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub tuples: Vec<GridTuple>,
    /// `A_t`, `M_t x L`.
    pub a_t: CMat,
    /// `A_r`, `M_r x L`.
    pub a_r: CMat,
}

impl CandidateSet {
    pub fn new(tuples: Vec<GridTuple>, grid: &AngleGrid, tx: &UpaGeometry, rx: &UpaGeometry) -> Self {
        let at: Vec<Vec<C64>> = tuples.iter().map(|t| steering_vector(tx, &grid.tx_angle(t.aod))).collect();
        let ar: Vec<Vec<C64>> = tuples.iter().map(|t| steering_vector(rx, &grid.rx_angle(t.aoa))).collect();
        let build = |cols: &[Vec<C64>], m: usize| {
            if cols.is_empty() {
                ComplexMatrix::zeros(m, 0)
            } else {
                ComplexMatrix::from_columns(cols).expect("equal lengths")
            }
        };
        Self {
            a_t: build(&at, tx.elements()),
            a_r: build(&ar, rx.elements()),
            tuples,
        }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

/// Folds azimuths `phi` and `pi - phi` together (a planar array cannot tell them
/// apart) and merges the resulting duplicate tuples by summed weight.
pub fn merge_array_aliases(entry: &CamEntry, grid: &AngleGrid) -> CamEntry {
    let fold = |g: GridAngle, j: usize| {
        if !j.is_multiple_of(2) {
            return g;
        }
        // Grid point j has cos(phi) < 0 when j lies strictly between J/4 and 3J/4.
        let four_j = 4 * g.azimuth;
        if four_j > j && four_j < 3 * j {
            GridAngle {
                zenith: g.zenith,
                azimuth: (j / 2 + j - g.azimuth) % j,
            }
        } else {
            g
        }
    };
    let mut order: Vec<GridTuple> = Vec::new();
    let mut weight: HashMap<GridTuple, f64> = HashMap::new();
    for c in &entry.candidates {
        let t = GridTuple {
            aod: fold(c.tuple.aod, grid.j_t),
            aoa: fold(c.tuple.aoa, grid.j_r),
        };
        let w = weight.entry(t).or_insert_with(|| {
            order.push(t);
            0.0
        });
        *w += c.weight;
    }
    let mut candidates: Vec<CamCandidate> = order
        .into_iter()
        .map(|t| CamCandidate {
            tuple: t,
            weight: weight[&t],
        })
        .collect();
    candidates.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.tuple.cmp(&b.tuple)));
    CamEntry {
        location: entry.location,
        candidates,
    }
}

/// Beam indices sorted by `||A^H b||^2`, strongest first (ties to the smaller index).
pub fn rank_beams_by_score(cb: &Codebook<f64>, a: &CMat) -> Vec<usize> {
    let mut score = vec![0.0f64; cb.len()];
    for l in 0..a.cols() {
        let col = a.column(l);
        for (p, s) in score.iter_mut().enumerate() {
            let ip: C64 = cb.beam(p).iter().zip(&col).map(|(b, x)| b.conj() * x).sum();
            *s += ip.norm_sqr();
        }
    }
    let mut idx: Vec<usize> = (0..cb.len()).collect();
    idx.sort_by(|&i, &j| score[j].total_cmp(&score[i]).then(i.cmp(&j)));
    idx
}

/// Training beamformer for given RF beam indices: eigen-directions of the
/// candidate-projected Gram matrices and equal power over `M_s` streams.
pub fn training_beamformer(
    cands: &CandidateSet,
    f: &Codebook<f64>,
    w: &Codebook<f64>,
    tx_beams: &[usize],
    rx_beams: &[usize],
    m_s: usize,
) -> Result<HybridBeamformer<f64>, CamError> {
    let f_rf = f.matrix(tx_beams)?;
    let w_rf = w.matrix(rx_beams)?;
    let ft = f_rf.adjoint().matmul(&cands.a_t)?;
    let (_, v) = evd_hermitian(&ft.matmul(&ft.adjoint())?.hermitian_part())?;
    let wr = w_rf.adjoint().matmul(&cands.a_r)?;
    let (_, u) = evd_hermitian(&wr.matmul(&wr.adjoint())?.hermitian_part())?;
    let scale = Complex::new(1.0 / (m_s as f64).sqrt(), 0.0);
    let f_bb = hermitian_inv_sqrt(&f_rf.gram())?.matmul(&v.leading_columns(m_s))?.scale(scale);
    let w_bb = hermitian_inv_sqrt(&w_rf.gram())?.matmul(&u)?;
    Ok(HybridBeamformer { f_rf, f_bb, w_rf, w_bb })
}

/// Single-epoch training design: the top-scoring `M_t^RF` / `M_r^RF` beams.
pub fn design_training_beams(
    cands: &CandidateSet,
    f: &Codebook<f64>,
    w: &Codebook<f64>,
    dims: &SystemDims,
) -> Result<HybridBeamformer<f64>, CamError> {
    if cands.is_empty() {
        return Err(CamError::NoCandidates);
    }
    let tx = rank_beams_by_score(f, &cands.a_t);
    let rx = rank_beams_by_score(w, &cands.a_r);
    training_beamformer(cands, f, w, &tx[..dims.m_t_rf], &rx[..dims.m_r_rf], dims.m_s)
}

/// Training epochs, pilots and the stacked observation matrix.
#[derive(Debug, Clone)]
pub struct CamTrainingPlan {
    pub epochs: Vec<HybridBeamformer<f64>>,
    /// Unitary `M_s x M_s` pilot block, reused every epoch.
    pub pilot: CMat,
    /// `(epochs * M_s^2) x L`.
    pub q_hat: CMat,
    pub candidates: CandidateSet,
    qr: QrFactorization<f64>,
}

impl CamTrainingPlan {
    pub fn m_s(&self) -> usize {
        self.pilot.rows()
    }

    /// Training symbols spent: `epochs * M_s`.
    pub fn symbols(&self) -> usize {
        self.epochs.len() * self.m_s()
    }

    pub fn condition(&self) -> Result<f64, CamError> {
        Ok(condition_number(&self.q_hat)?)
    }
}

/// One epoch's Khatri-Rao block `(F^T A_t^*) o (W^H A_r)` with `F = F_RF F_BB`, `W = W_RF W_BB`.
pub fn observation_block(bf: &HybridBeamformer<f64>, cands: &CandidateSet) -> Result<CMat, CamError> {
    let ft = bf.precoder().transpose().matmul(&cands.a_t.conj())?;
    let wr = bf.combiner().adjoint().matmul(&cands.a_r)?;
    Ok(khatri_rao(&ft, &wr)?)
}

/// Stacks per-epoch observation blocks and factors the result.
pub fn build_observation(epochs: Vec<HybridBeamformer<f64>>, cands: CandidateSet, m_s: usize) -> Result<CamTrainingPlan, CamError> {
    if cands.is_empty() {
        return Err(CamError::NoCandidates);
    }
    let mut q: Option<CMat> = None;
    for bf in &epochs {
        let block = observation_block(bf, &cands)?;
        q = Some(match q {
            None => block,
            Some(prev) => prev.vstack(&block)?,
        });
    }
    let q_hat = q.ok_or(CamError::NoCandidates)?;
    let qr = QrFactorization::new(&q_hat).map_err(|e| match e {
        LinalgError::RankDeficient { .. } | LinalgError::DimensionMismatch { .. } => CamError::RankDeficient {
            epochs: epochs.len(),
            condition: f64::INFINITY,
        },
        other => other.into(),
    })?;
    Ok(CamTrainingPlan {
        epochs,
        pilot: unitary_dft(m_s),
        q_hat,
        candidates: cands,
        qr,
    })
}

/// Minimal epoch count `ceil(L / M_s^2)`.
pub fn minimal_epochs(l_hat: usize, m_s: usize) -> usize {
    l_hat.div_ceil(m_s * m_s).max(1)
}

/// Full training plan: epoch `e` uses the `e`-th block of score-ranked transmit
/// beams and a rotating block of ranked receive beams; up to
/// [`MAX_REPAIR_EPOCHS`] further epochs are appended while the observation
/// matrix is rank deficient or worse conditioned than [`MAX_CONDITION`].
pub fn plan_training(
    cands: CandidateSet,
    f: &Codebook<f64>,
    w: &Codebook<f64>,
    dims: &SystemDims,
) -> Result<CamTrainingPlan, CamError> {
    if cands.is_empty() {
        return Err(CamError::NoCandidates);
    }
    let tx_rank = rank_beams_by_score(f, &cands.a_t);
    let rx_rank = rank_beams_by_score(w, &cands.a_r);
    let block = |rank: &[usize], size: usize, e: usize| -> Vec<usize> {
        let blocks = (rank.len() / size).max(1);
        let start = (e % blocks) * size;
        rank[start..start + size].to_vec()
    };
    let epoch = |e: usize| {
        training_beamformer(
            &cands,
            f,
            w,
            &block(&tx_rank, dims.m_t_rf, e),
            &block(&rx_rank, dims.m_r_rf, e),
            dims.m_s,
        )
    };
    let base = minimal_epochs(cands.len(), dims.m_s);
    let mut epochs = (0..base).map(epoch).collect::<Result<Vec<_>, _>>()?;
    let mut last_condition = f64::INFINITY;
    for extra in 0..=MAX_REPAIR_EPOCHS {
        if epochs.len() * dims.m_s * dims.m_s >= cands.len() {
            match build_observation(epochs.clone(), cands.clone(), dims.m_s) {
                Ok(plan) => {
                    let cond = plan.condition()?;
                    if cond <= MAX_CONDITION {
                        return Ok(plan);
                    }
                    last_condition = cond;
                }
                Err(CamError::RankDeficient { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        if extra < MAX_REPAIR_EPOCHS {
            epochs.push(epoch(epochs.len())?);
        }
    }
    Err(CamError::RankDeficient {
        epochs: epochs.len(),
        condition: last_condition,
    })
}

/// Received training observations `y = vec(Y S^H)` stacked over epochs, with
/// `Y = sqrt(P) W^H H F S + W^H N` and unit-variance noise. `rng = None` gives
/// the noiseless observations.
pub fn simulate_training(h: &CMat, plan: &CamTrainingPlan, snr: f64, mut rng: Option<&mut SimRng>) -> Result<Vec<C64>, CamError> {
    let sp = snr.sqrt();
    let s = &plan.pilot;
    let s_h = s.adjoint();
    let mut y = Vec::with_capacity(plan.q_hat.rows());
    for bf in &plan.epochs {
        let comb = bf.combiner().adjoint();
        let mut block = comb.matmul(h)?.matmul(&bf.precoder())?.matmul(s)?.scale_real(sp);
        if let Some(r) = rng.as_deref_mut() {
            let n = gaussian_matrix(h.rows(), s.cols(), r);
            block = &block + &comb.matmul(&n)?;
        }
        y.extend(block.matmul(&s_h)?.vec());
    }
    Ok(y)
}

/// Least-squares path gains and the fit residual.
#[derive(Debug, Clone, PartialEq)]
pub struct GainEstimate {
    /// Compact gains (they include the `sqrt(M_r M_t)` factor).
    pub gains: Vec<C64>,
    pub residual: f64,
}

/// `alpha = (1/sqrt(P)) argmin ||Q a - y||`.
pub fn estimate_gains(y: &[C64], plan: &CamTrainingPlan, snr: f64) -> Result<GainEstimate, CamError> {
    if y.len() != plan.q_hat.rows() {
        return Err(CamError::ObservationLength {
            expected: plan.q_hat.rows(),
            got: y.len(),
        });
    }
    let (x, residual) = plan.qr.solve(y)?;
    let inv = 1.0 / snr.sqrt();
    Ok(GainEstimate {
        gains: x.into_iter().map(|v| v * inv).collect(),
        residual: residual * inv,
    })
}

/// `H = A_r Diag(alpha) A_t^H`.
pub fn reconstruct_channel(cands: &CandidateSet, gains: &[C64]) -> CMat {
    let (mr, mt) = (cands.a_r.rows(), cands.a_t.rows());
    let mut h = ComplexMatrix::zeros(mr, mt);
    for (l, g) in gains.iter().enumerate() {
        for r in 0..mr {
            let ga = *g * cands.a_r[(r, l)];
            for c in 0..mt {
                h[(r, c)] += ga * cands.a_t[(c, l)].conj();
            }
        }
    }
    h
}

/// Gain-estimation MSE: the exact least-squares value and two lower bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseReport {
    /// `(sigma^2/P) tr((Q^H Q)^{-1})`.
    pub exact: f64,
    /// `sigma^2 L^2 / (P tr(Q^H Q))`.
    pub trace_bound: f64,
    /// `sigma^2 L^2 / (P sum_e ||A_t^H F_e||^2 ||A_r^H W_e||^2)`.
    pub bound: f64,
}

/// MSE of the LS gain estimate and its lower bounds (unit noise variance).
///
/// Requires every epoch's combiner to be semi-unitary, which makes the
/// projected noise white.
pub fn mse_lower_bound(plan: &CamTrainingPlan, snr: f64) -> Result<MseReport, CamError> {
    for bf in &plan.epochs {
        let g = bf.combiner().gram();
        let dev = (&g - &ComplexMatrix::identity(g.rows())).frobenius_norm();
        if dev > 1e-10 {
            return Err(CamError::HypothesisViolated { deviation: dev });
        }
    }
    let l = plan.candidates.len() as f64;
    let gram = plan.q_hat.gram();
    let (vals, _) = evd_hermitian(&gram)?;
    let exact = vals.iter().map(|v| 1.0 / v).sum::<f64>() / snr;
    let trace = gram.trace().re;
    let denom: f64 = plan
        .epochs
        .iter()
        .map(|bf| {
            let t = plan.candidates.a_t.adjoint().matmul(&bf.precoder()).expect("shapes").frobenius_norm_sqr();
            let r = plan.candidates.a_r.adjoint().matmul(&bf.combiner()).expect("shapes").frobenius_norm_sqr();
            t * r
        })
        .sum();
    Ok(MseReport {
        exact,
        trace_bound: l * l / (snr * trace),
        bound: l * l / (snr * denom),
    })
}
