//! BIM-aided beam sweeping over candidate beams, submatrix selection and
//! digital beamforming from the measurements alone.

use thiserror::Error;

use crate::codebooks::{binomial, enumerate_selections};
use crate::hybrid::{baseband_from_whitened, HybridBeamformer, HybridError, SystemDims};
use crate::numerics::{hermitian_inv_sqrt, ComplexMatrix, LinalgError};
use crate::random::{gaussian_matrix, unitary_dft, SimRng};
use crate::CMat;

#[derive(Debug, Error)]
pub enum BimError {
    #[error("need at least {needed} candidate {side} beams, got {got}")]
    TooFewBeams { side: &'static str, needed: usize, got: usize },
    #[error("exhaustive selection needs {pairs} subset pairs, above the budget of {budget}")]
    BudgetExceeded { pairs: u128, budget: u128 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
}

/// Concatenated sweep observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepMeasurement {
    /// `|W^| x |F^|`; noiseless entry `(q, p)` is `sqrt(P) rho w_q^H H f_p`.
    pub y_tilde: CMat,
    /// Precoder normalization of a full transmit group.
    pub rho: f64,
    /// Training symbols spent.
    pub n_tr: usize,
}

/// `M_s * ceil(|F^| / M_s) * ceil(|W^| / M_r^RF)`.
pub fn sweep_symbols(n_tx: usize, n_rx: usize, m_r_rf: usize) -> usize {
    m_r_rf * n_tx.div_ceil(m_r_rf) * n_rx.div_ceil(m_r_rf)
}

fn check_sizes(n_tx: usize, n_rx: usize, m_t_rf: usize, m_r_rf: usize) -> Result<(), BimError> {
    if n_tx < m_t_rf {
        return Err(BimError::TooFewBeams {
            side: "transmit",
            needed: m_t_rf,
            got: n_tx,
        });
    }
    if n_rx < m_r_rf {
        return Err(BimError::TooFewBeams {
            side: "receive",
            needed: m_r_rf,
            got: n_rx,
        });
    }
    Ok(())
}

/// Sweeps every pair of transmit group (size `M_s`) and receive group (size
/// `M_r^RF`), one pilot block of `M_s` symbols each.
///
/// Each epoch uses `F_BB = rho [I; 0]` and `W_BB = I`: only the group's beams
/// carry power, so the precoder is `rho` times the group. A ragged last group
/// is padded with zero beams whose outputs are dropped, and its columns are
/// rescaled to the full-group `rho` so one normalization covers all of `Y~`.
/// `rng = None` gives the noiseless sweep.
pub fn sweep(
    h: &CMat,
    f_hat: &CMat,
    w_hat: &CMat,
    dims: &SystemDims,
    mut rng: Option<&mut SimRng>,
) -> Result<SweepMeasurement, BimError> {
    let (n_tx, n_rx) = (f_hat.cols(), w_hat.cols());
    check_sizes(n_tx, n_rx, dims.m_t_rf, dims.m_r_rf)?;
    let m_s = dims.m_s;
    let g = dims.m_r_rf;
    let s = unitary_dft(m_s);
    let s_h = s.adjoint();
    let sp = dims.snr.sqrt();
    let group_rho = |cols: &[usize]| 1.0 / f_hat.select_columns(cols).frobenius_norm();
    let first: Vec<usize> = (0..m_s).collect();
    let rho = group_rho(&first);
    let mut y_tilde = ComplexMatrix::zeros(n_rx, n_tx);
    for tx_start in (0..n_tx).step_by(m_s) {
        let tx: Vec<usize> = (tx_start..(tx_start + m_s).min(n_tx)).collect();
        let rho_i = group_rho(&tx);
        let mut precoder = ComplexMatrix::zeros(h.cols(), m_s);
        for (k, &p) in tx.iter().enumerate() {
            precoder.set_column(k, &f_hat.column(p));
        }
        let precoder = precoder.scale_real(rho_i);
        for rx_start in (0..n_rx).step_by(g) {
            let rx: Vec<usize> = (rx_start..(rx_start + g).min(n_rx)).collect();
            let mut comb = ComplexMatrix::zeros(h.rows(), g);
            for (k, &q) in rx.iter().enumerate() {
                comb.set_column(k, &w_hat.column(q));
            }
            let comb_h = comb.adjoint();
            let mut y = comb_h.matmul(h)?.matmul(&precoder)?.matmul(&s)?.scale_real(sp);
            if let Some(r) = rng.as_deref_mut() {
                y = &y + &comb_h.matmul(&gaussian_matrix(h.rows(), m_s, r))?;
            }
            let y = y.matmul(&s_h)?;
            let fix = rho / rho_i;
            for (a, &q) in rx.iter().enumerate() {
                for (b, &p) in tx.iter().enumerate() {
                    y_tilde[(q, p)] = y[(a, b)] * fix;
                }
            }
        }
    }
    Ok(SweepMeasurement {
        y_tilde,
        rho,
        n_tr: sweep_symbols(n_tx, n_rx, dims.m_r_rf),
    })
}

/// Chosen rows (receive beams), columns (transmit beams) and the submatrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmatrixSelection {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: CMat,
}

impl SubmatrixSelection {
    fn new(y: &CMat, rows: Vec<usize>, cols: Vec<usize>) -> Self {
        let values = y.submatrix(&rows, &cols);
        Self { rows, cols, values }
    }

    /// `||Y^||_F^2`.
    pub fn objective(&self) -> f64 {
        self.values.frobenius_norm_sqr()
    }
}

fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut pick = idx[..k].to_vec();
    pick.sort_unstable();
    pick
}

/// Greedy selection: the `M_t^RF` strongest columns, then the `M_r^RF`
/// strongest rows restricted to those columns. Ties go to the smaller index.
pub fn select_submatrix_greedy(y: &CMat, m_t_rf: usize, m_r_rf: usize) -> Result<SubmatrixSelection, BimError> {
    check_sizes(y.cols(), y.rows(), m_t_rf, m_r_rf)?;
    let col_scores: Vec<f64> = (0..y.cols()).map(|c| y.column_norm_sqr(c)).collect();
    let cols = top_k(&col_scores, m_t_rf);
    let row_scores: Vec<f64> = (0..y.rows())
        .map(|r| cols.iter().map(|&c| y[(r, c)].norm_sqr()).sum())
        .collect();
    let rows = top_k(&row_scores, m_r_rf);
    Ok(SubmatrixSelection::new(y, rows, cols))
}

/// Exact maximum-Frobenius-norm submatrix. Enumerates row subsets (outer) and
/// column subsets (inner) in lexicographic order; the first maximum wins.
pub fn select_submatrix_exhaustive(
    y: &CMat,
    m_t_rf: usize,
    m_r_rf: usize,
    budget: u128,
) -> Result<SubmatrixSelection, BimError> {
    check_sizes(y.cols(), y.rows(), m_t_rf, m_r_rf)?;
    let pairs = binomial(y.rows(), m_r_rf).saturating_mul(binomial(y.cols(), m_t_rf));
    if pairs > budget {
        return Err(BimError::BudgetExceeded { pairs, budget });
    }
    let power = y.map(|v| v.norm_sqr().into());
    let col_subsets: Vec<Vec<usize>> = enumerate_selections(y.cols(), m_t_rf).expect("sizes checked").collect();
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for rows in enumerate_selections(y.rows(), m_r_rf).expect("sizes checked") {
        let col_power: Vec<f64> = (0..y.cols()).map(|c| rows.iter().map(|&r| power[(r, c)].re).sum()).collect();
        for cols in &col_subsets {
            let v: f64 = cols.iter().map(|&c| col_power[c]).sum();
            if best.as_ref().is_none_or(|b| v > b.0) {
                best = Some((v, rows.clone(), cols.clone()));
            }
        }
    }
    let (_, rows, cols) = best.expect("at least one subset");
    Ok(SubmatrixSelection::new(y, rows, cols))
}

/// Hybrid beamformer built only from the sweep: the whitened channel
/// `H~ = (W^H W)^{-1/2} Y^ (F^H F)^{-1/2} / (rho sqrt(P))` followed by SVD and
/// water-filling. Returns the beamformer and the rate predicted by `H~`.
pub fn beamformers_from_sweep(
    meas: &SweepMeasurement,
    sel: &SubmatrixSelection,
    f_hat: &CMat,
    w_hat: &CMat,
    snr: f64,
) -> Result<(HybridBeamformer<f64>, f64), BimError> {
    let f_rf = f_hat.select_columns(&sel.cols);
    let w_rf = w_hat.select_columns(&sel.rows);
    let fw = hermitian_inv_sqrt(&f_rf.gram())?;
    let ww = hermitian_inv_sqrt(&w_rf.gram())?;
    let h_tilde = ww
        .matmul(&sel.values)?
        .matmul(&fw)?
        .scale_real(1.0 / (meas.rho * snr.sqrt()));
    Ok(baseband_from_whitened(&h_tilde, &f_rf, &w_rf, &fw, &ww, snr)?)
}

/// Transmit beams by column norm and receive beams by row norm, strongest first,
/// ties by index.
pub fn rank_beams(y: &CMat) -> (Vec<usize>, Vec<usize>) {
    let order = |scores: Vec<f64>| {
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        idx
    };
    (
        order((0..y.cols()).map(|c| y.column_norm_sqr(c)).collect()),
        order((0..y.rows()).map(|r| y.row_norm_sqr(r)).collect()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    #[test]
    fn overhead_count() {
        assert_eq!(sweep_symbols(20, 10, 4), 60);
        assert_eq!(sweep_symbols(4, 4, 4), 4);
        assert_eq!(sweep_symbols(8, 8, 4), 16);
    }

    #[test]
    fn tie_case_takes_first() {
        let y = ComplexMatrix::from_fn(5, 6, |_, _| C64::new(1.0, 0.0));
        let s = select_submatrix_greedy(&y, 3, 2).unwrap();
        assert_eq!(s.cols, vec![0, 1, 2]);
        assert_eq!(s.rows, vec![0, 1]);
        let e = select_submatrix_exhaustive(&y, 3, 2, 1_000).unwrap();
        assert_eq!((e.rows, e.cols), (vec![0, 1], vec![0, 1, 2]));
    }

    #[test]
    fn zero_matrix_ranks_in_index_order() {
        let (t, r) = rank_beams(&ComplexMatrix::zeros(3, 4));
        assert_eq!(t, vec![0, 1, 2, 3]);
        assert_eq!(r, vec![0, 1, 2]);
    }
}
