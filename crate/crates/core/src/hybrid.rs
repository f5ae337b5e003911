//! Whitened effective channels, optimal digital beamforming and exhaustive RF selection.

use rayon::prelude::*;
use thiserror::Error;

use crate::codebooks::{binomial, enumerate_selections, Codebook, CodebookError};
use crate::numerics::{
    allocation_rate, evd_hermitian, hermitian_inv_sqrt, hermitian_logdet, svd, water_filling, ComplexMatrix,
    LinalgError,
};
use crate::scalar::{creal, Real};

/// Default cap on the number of (F_RF, W_RF) pairs the exhaustive search may visit.
pub const DEFAULT_SEARCH_BUDGET: u128 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HybridError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error("invalid system dimensions: {0}")]
    InvalidDims(String),
    #[error(
        "exhaustive search needs {pairs} selection pairs, above the budget of {budget}; \
         use smaller codebooks or fewer RF chains"
    )]
    BudgetExceeded { pairs: u128, budget: u128 },
    #[error("transmit covariance is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("training length {n_tr} exceeds block length {n}")]
    TrainingTooLong { n_tr: usize, n: usize },
    #[error("no block rates to average")]
    NoBlocks,
    #[error("no RF selection gives a usable effective channel")]
    NoFeasibleSelection,
}

/// Antenna, RF-chain and block parameters of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemDims {
    pub m_t: usize,
    pub m_r: usize,
    pub m_t_rf: usize,
    pub m_r_rf: usize,
    /// Data streams; equals `m_r_rf`.
    pub m_s: usize,
    /// Symbols per coherence block.
    pub n: usize,
    /// Transmit SNR `P / sigma^2`, linear.
    pub snr: f64,
}

impl SystemDims {
    /// Builds dims with `m_s = m_r_rf` and validates them.
    pub fn new(m_t: usize, m_r: usize, m_t_rf: usize, m_r_rf: usize, n: usize, snr: f64) -> Result<Self, HybridError> {
        let d = Self {
            m_t,
            m_r,
            m_t_rf,
            m_r_rf,
            m_s: m_r_rf,
            n,
            snr,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), HybridError> {
        let bad = |m: &str| Err(HybridError::InvalidDims(m.to_string()));
        if self.m_r_rf == 0 || self.m_t_rf == 0 {
            return bad("RF chain counts must be positive");
        }
        if self.m_r_rf > self.m_t_rf {
            return bad("M_r^RF must not exceed M_t^RF");
        }
        if self.m_s != self.m_r_rf {
            return bad("M_s must equal M_r^RF");
        }
        if self.m_t_rf >= self.m_t || self.m_r_rf >= self.m_r {
            return bad("RF chains must be fewer than antennas");
        }
        if self.n == 0 {
            return bad("block length must be positive");
        }
        if !(self.snr > 0.0) || !self.snr.is_finite() {
            return bad("SNR must be positive and finite");
        }
        Ok(())
    }

    /// `P~` in the working precision.
    pub fn snr_as<T: Real>(&self) -> T {
        T::lit(self.snr)
    }
}

/// Analog/digital beamformer quadruple.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridBeamformer<T: Real> {
    pub f_rf: ComplexMatrix<T>,
    pub f_bb: ComplexMatrix<T>,
    pub w_rf: ComplexMatrix<T>,
    pub w_bb: ComplexMatrix<T>,
}

impl<T: Real> HybridBeamformer<T> {
    pub fn precoder(&self) -> ComplexMatrix<T> {
        &self.f_rf * &self.f_bb
    }

    pub fn combiner(&self) -> ComplexMatrix<T> {
        &self.w_rf * &self.w_bb
    }

    /// `||F_RF F_BB||_F^2`.
    pub fn transmit_power(&self) -> T {
        self.precoder().frobenius_norm_sqr()
    }

    /// `R_x = F_BB F_BB^H`.
    pub fn covariance(&self) -> ComplexMatrix<T> {
        (&self.f_bb * &self.f_bb.adjoint()).hermitian_part()
    }
}

/// `H_e = (W^H W)^{-1/2} W^H H F`.
pub fn effective_channel<T: Real>(
    h: &ComplexMatrix<T>,
    f_rf: &ComplexMatrix<T>,
    w_rf: &ComplexMatrix<T>,
) -> Result<ComplexMatrix<T>, HybridError> {
    let whiten = hermitian_inv_sqrt(&w_rf.gram())?;
    let wh = w_rf.adjoint().matmul(h)?.matmul(f_rf)?;
    Ok(whiten.matmul(&wh)?)
}

/// `log2 det(I + P~ H_e R_x H_e^H)`.
pub fn rate<T: Real>(h_e: &ComplexMatrix<T>, r_x: &ComplexMatrix<T>, snr: T) -> Result<T, HybridError> {
    let (vals, _) = evd_hermitian(r_x)?;
    let top = vals.first().copied().unwrap_or(T::zero()).abs().max(T::one());
    let min = vals.last().copied().unwrap_or(T::zero());
    if min < -T::hermitian_tolerance() * top {
        return Err(HybridError::NotPsd(min.to_f64_lossy()));
    }
    let inner = h_e.matmul(r_x)?.matmul(&h_e.adjoint())?;
    let n = inner.rows();
    let m = (&ComplexMatrix::identity(n) + &inner.scale_real(snr)).hermitian_part();
    Ok(hermitian_logdet(&m)? / T::LN_2())
}

/// Optimal digital beamformers for a given whitened channel `H~` and RF matrices.
///
/// `f_whiten` and `w_whiten` are `(F_RF^H F_RF)^{-1/2}` and `(W_RF^H W_RF)^{-1/2}`.
/// Returns the beamformer and `sum_i log2(1 + P~ rho_i sigma_i^2)`.
pub fn baseband_from_whitened<T: Real>(
    h_tilde: &ComplexMatrix<T>,
    f_rf: &ComplexMatrix<T>,
    w_rf: &ComplexMatrix<T>,
    f_whiten: &ComplexMatrix<T>,
    w_whiten: &ComplexMatrix<T>,
    snr: T,
) -> Result<(HybridBeamformer<T>, T), HybridError> {
    let dec = svd(h_tilde)?;
    let m_s = dec.singular_values.len();
    let (rho, rate) = match water_filling(&dec.singular_values, snr) {
        Ok(p) => {
            let r = allocation_rate(&p.coefficients, &dec.singular_values, snr);
            (p.coefficients, r)
        }
        // Zero channel: equal power over the first streams, no rate.
        Err(LinalgError::NoPositiveGain) => (vec![T::one() / T::from_usize(m_s).expect("count"); m_s], T::zero()),
        Err(e) => return Err(e.into()),
    };
    let v1 = dec.v.leading_columns(m_s);
    let gamma_sqrt = ComplexMatrix::real_diagonal(&rho.iter().map(|r| r.sqrt()).collect::<Vec<_>>());
    let f_bb = f_whiten.matmul(&v1)?.matmul(&gamma_sqrt)?;
    let w_bb = w_whiten.matmul(&dec.u.leading_columns(m_s))?;
    Ok((
        HybridBeamformer {
            f_rf: f_rf.clone(),
            f_bb,
            w_rf: w_rf.clone(),
            w_bb,
        },
        rate,
    ))
}

/// Optimal baseband precoder/combiner for fixed RF matrices, and its rate.
pub fn optimal_baseband<T: Real>(
    h: &ComplexMatrix<T>,
    f_rf: &ComplexMatrix<T>,
    w_rf: &ComplexMatrix<T>,
    snr: T,
) -> Result<(HybridBeamformer<T>, T), HybridError> {
    let fw = hermitian_inv_sqrt(&f_rf.gram())?;
    let ww = hermitian_inv_sqrt(&w_rf.gram())?;
    let h_tilde = ww.matmul(&w_rf.adjoint())?.matmul(h)?.matmul(f_rf)?.matmul(&fw)?;
    baseband_from_whitened(&h_tilde, f_rf, w_rf, &fw, &ww, snr)
}

/// Rate a beamformer actually achieves on channel `h`.
pub fn achieved_rate<T: Real>(h: &ComplexMatrix<T>, bf: &HybridBeamformer<T>, snr: T) -> Result<T, HybridError> {
    let h_e = effective_channel(h, &bf.f_rf, &bf.w_rf)?;
    rate(&h_e, &bf.covariance(), snr)
}

/// Best rate for every pair of RF selections, using precomputed beam-space quantities.
struct BeamSpace<T: Real> {
    /// `W^H H F`, rx beams by tx beams.
    gains: ComplexMatrix<T>,
    tx_gram: ComplexMatrix<T>,
    rx_gram: ComplexMatrix<T>,
}

impl<T: Real> BeamSpace<T> {
    fn new(h: &ComplexMatrix<T>, f: &ComplexMatrix<T>, w: &ComplexMatrix<T>) -> Result<Self, HybridError> {
        Ok(Self {
            gains: w.adjoint().matmul(h)?.matmul(f)?,
            tx_gram: f.gram(),
            rx_gram: w.gram(),
        })
    }

    fn selection_rate(&self, tx: &[usize], rx: &[usize], snr: T) -> Result<T, HybridError> {
        let fw = hermitian_inv_sqrt(&self.tx_gram.submatrix(tx, tx))?;
        let ww = hermitian_inv_sqrt(&self.rx_gram.submatrix(rx, rx))?;
        let h_tilde = ww.matmul(&self.gains.submatrix(rx, tx))?.matmul(&fw)?;
        let sv = svd(&h_tilde)?.singular_values;
        Ok(match water_filling(&sv, snr) {
            Ok(p) => allocation_rate(&p.coefficients, &sv, snr),
            Err(_) => T::zero(),
        })
    }
}

/// Exhaustive search over all RF selections (tx subsets outer, rx subsets inner).
///
/// Selection pairs are evaluated in parallel; the winner is the highest rate,
/// ties going to the earliest pair in enumeration order. Selections whose RF
/// matrices are rank deficient are skipped.
pub fn algorithm1<T: Real>(
    h: &ComplexMatrix<T>,
    f: &Codebook<T>,
    w: &Codebook<T>,
    dims: &SystemDims,
    budget: u128,
) -> Result<(HybridBeamformer<T>, T), HybridError> {
    let pairs = binomial(f.len(), dims.m_t_rf).saturating_mul(binomial(w.len(), dims.m_r_rf));
    if pairs > budget {
        return Err(HybridError::BudgetExceeded { pairs, budget });
    }
    let tx_sel: Vec<Vec<usize>> = enumerate_selections(f.len(), dims.m_t_rf)?.collect();
    let rx_sel: Vec<Vec<usize>> = enumerate_selections(w.len(), dims.m_r_rf)?.collect();
    let all_f: Vec<usize> = (0..f.len()).collect();
    let all_w: Vec<usize> = (0..w.len()).collect();
    let space = BeamSpace::new(h, &f.matrix(&all_f)?, &w.matrix(&all_w)?)?;
    let snr = dims.snr_as::<T>();
    let n_rx = rx_sel.len();
    let best = (0..tx_sel.len() * n_rx)
        .into_par_iter()
        .filter_map(|idx| {
            space
                .selection_rate(&tx_sel[idx / n_rx], &rx_sel[idx % n_rx], snr)
                .ok()
                .filter(|r| r.is_finite())
                .map(|r| (r, idx))
        })
        .reduce_with(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        });
    let (_, idx) = best.ok_or(HybridError::NoFeasibleSelection)?;
    let f_rf = f.matrix(&tx_sel[idx / n_rx])?;
    let w_rf = w.matrix(&rx_sel[idx % n_rx])?;
    optimal_baseband(h, &f_rf, &w_rf, snr)
}

/// Indices chosen by [`algorithm1`], for callers that need them.
pub fn algorithm1_selection<T: Real>(
    h: &ComplexMatrix<T>,
    f: &Codebook<T>,
    w: &Codebook<T>,
    dims: &SystemDims,
    budget: u128,
) -> Result<(Vec<usize>, Vec<usize>, T), HybridError> {
    let (bf, rate) = algorithm1(h, f, w, dims, budget)?;
    let find = |cb: &Codebook<T>, m: &ComplexMatrix<T>| -> Vec<usize> {
        (0..m.cols())
            .map(|c| {
                let col = m.column(c);
                (0..cb.len())
                    .find(|&i| cb.beam(i) == col.as_slice())
                    .expect("selected beam comes from the codebook")
            })
            .collect()
    };
    Ok((find(f, &bf.f_rf), find(w, &bf.w_rf), rate))
}

/// `mean(block_rates) * (N - N_tr) / N`.
pub fn effective_rate(block_rates: &[f64], n_tr: usize, n: usize) -> Result<f64, HybridError> {
    if n_tr > n {
        return Err(HybridError::TrainingTooLong { n_tr, n });
    }
    if block_rates.is_empty() {
        return Err(HybridError::NoBlocks);
    }
    let mean = block_rates.iter().sum::<f64>() / block_rates.len() as f64;
    Ok(mean * pre_log(n_tr, n))
}

/// `(N - N_tr) / N`, zero when training does not fit in the block.
pub fn pre_log(n_tr: usize, n: usize) -> f64 {
    if n_tr >= n {
        0.0
    } else {
        (n - n_tr) as f64 / n as f64
    }
}

/// Equal split of unit power over `k` streams, as an `R_x` for [`rate`].
pub fn equal_power_covariance<T: Real>(k: usize) -> ComplexMatrix<T> {
    ComplexMatrix::identity(k).scale(creal(T::one() / T::from_usize(k).expect("count")))
}
