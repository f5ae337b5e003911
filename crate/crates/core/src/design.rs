//! Data-phase beamformer design from a channel matrix (true or estimated).

use crate::bim::{select_submatrix_greedy, BimError};
use crate::codebooks::{binomial, Codebook};
use crate::hybrid::{algorithm1, optimal_baseband, HybridBeamformer, HybridError, SystemDims};
use crate::CMat;

/// Largest number of RF selection pairs searched exhaustively; beyond it the
/// greedy beam-space selection is used.
pub const EXHAUSTIVE_PAIR_LIMIT: u128 = 10_000;

/// How the RF beams were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    Exhaustive,
    Greedy,
}

pub fn selection_rule(f: &Codebook<f64>, w: &Codebook<f64>, dims: &SystemDims) -> SelectionRule {
    let pairs = binomial(f.len(), dims.m_t_rf).saturating_mul(binomial(w.len(), dims.m_r_rf));
    if pairs <= EXHAUSTIVE_PAIR_LIMIT {
        SelectionRule::Exhaustive
    } else {
        SelectionRule::Greedy
    }
}

/// RF beams by greedy max-norm submatrix of `W^H H F`, then optimal baseband for `h`.
pub fn greedy_design(
    h: &CMat,
    f: &Codebook<f64>,
    w: &Codebook<f64>,
    dims: &SystemDims,
) -> Result<(HybridBeamformer<f64>, f64), HybridError> {
    let all_f: Vec<usize> = (0..f.len()).collect();
    let all_w: Vec<usize> = (0..w.len()).collect();
    let f_all = f.matrix(&all_f)?;
    let w_all = w.matrix(&all_w)?;
    let g = w_all.adjoint().matmul(h)?.matmul(&f_all)?;
    let sel = select_submatrix_greedy(&g, dims.m_t_rf, dims.m_r_rf).map_err(|e| match e {
        BimError::Hybrid(h) => h,
        BimError::Linalg(l) => l.into(),
        other => HybridError::InvalidDims(other.to_string()),
    })?;
    optimal_baseband(h, &f.matrix(&sel.cols)?, &w.matrix(&sel.rows)?, dims.snr)
}

/// Exhaustive search when it is small enough, greedy otherwise. Returns the
/// beamformer and the rate `h` predicts for it.
pub fn design_from_channel(
    h: &CMat,
    f: &Codebook<f64>,
    w: &Codebook<f64>,
    dims: &SystemDims,
) -> Result<(HybridBeamformer<f64>, f64), HybridError> {
    match selection_rule(f, w, dims) {
        SelectionRule::Exhaustive => algorithm1(h, f, w, dims, EXHAUSTIVE_PAIR_LIMIT),
        SelectionRule::Greedy => greedy_design(h, f, w, dims),
    }
}
