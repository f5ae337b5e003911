use super::LinalgError;
use crate::scalar::Real;

/// Stream power split `rho` (sums to one) and the water level `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation<T: Real> {
    pub coefficients: Vec<T>,
    pub water_level: T,
}

impl<T: Real> PowerAllocation<T> {
    /// `sum_i log2(1 + snr * rho_i * sigma_i^2)`.
    pub fn rate_bits(&self, singular_values: &[T], snr: T) -> T {
        allocation_rate(&self.coefficients, singular_values, snr)
    }
}

/// Rate of an arbitrary allocation, in bits.
pub fn allocation_rate<T: Real>(rho: &[T], singular_values: &[T], snr: T) -> T {
    let nats: T = rho
        .iter()
        .zip(singular_values)
        .map(|(r, s)| (snr * *r * *s * *s).ln_1p())
        .sum();
    nats / T::LN_2()
}

/// Capacity-optimal power split over parallel channels with gains `sigma_i`.
///
/// Closed form over the sorted inverse gains: the active set is the largest
/// prefix whose water level clears its weakest member. Coefficients are formed
/// from gain differences so very weak channels do not cancel catastrophically.
pub fn water_filling<T: Real>(singular_values: &[T], snr: T) -> Result<PowerAllocation<T>, LinalgError> {
    if !(snr > T::zero()) {
        return Err(LinalgError::NoPositiveGain);
    }
    // Inverse channel gains; channels whose gain underflows never get power.
    let inv: Vec<Option<T>> = singular_values
        .iter()
        .map(|s| {
            let g = snr * *s * *s;
            let c = T::one() / g;
            (g > T::zero() && c.is_finite()).then_some(c)
        })
        .collect();
    let mut order: Vec<usize> = (0..inv.len()).filter(|&i| inv[i].is_some()).collect();
    if order.is_empty() {
        return Err(LinalgError::NoPositiveGain);
    }
    order.sort_by(|&a, &b| inv[a].partial_cmp(&inv[b]).expect("finite"));
    let c: Vec<T> = order.iter().map(|&i| inv[i].expect("filtered")).collect();

    // Largest k with (1 + sum_{j<k} (c_j - c_{k-1})) > 0, i.e. mu > c_{k-1}.
    let mut k = c.len();
    while k > 1 {
        let last = c[k - 1];
        let slack = T::one() + c[..k].iter().map(|cj| *cj - last).sum::<T>();
        if slack > T::zero() {
            break;
        }
        k -= 1;
    }
    let kt = T::from_usize(k).expect("count fits");
    let mut coefficients = vec![T::zero(); inv.len()];
    for (pos, &idx) in order[..k].iter().enumerate() {
        let ci = c[pos];
        let rho = (T::one() + c[..k].iter().map(|cj| *cj - ci).sum::<T>()) / kt;
        coefficients[idx] = rho.max(T::zero());
    }
    let sum: T = coefficients.iter().copied().sum();
    coefficients.iter_mut().for_each(|r| *r /= sum);
    let water_level = (T::one() + c[..k].iter().copied().sum::<T>()) / kt;
    Ok(PowerAllocation {
        coefficients,
        water_level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_and_single() {
        let p = water_filling::<f64>(&[1.0, 1.0], 7.0).unwrap();
        assert!((p.coefficients[0] - 0.5).abs() < 1e-15);
        let p = water_filling(&[3.0], 0.1).unwrap();
        assert_eq!(p.coefficients, vec![1.0]);
    }

    #[test]
    fn weak_stream_switched_off() {
        let p = water_filling::<f64>(&[10.0, 0.01], 1.0).unwrap();
        assert_eq!(p.coefficients[1], 0.0);
        assert!((p.coefficients[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_gain_error() {
        assert_eq!(water_filling(&[0.0, 0.0], 1.0), Err(LinalgError::NoPositiveGain));
        assert_eq!(water_filling(&[1.0], 0.0), Err(LinalgError::NoPositiveGain));
    }

    #[test]
    fn underflowing_gains() {
        let p = water_filling(&[2.4e-32f64], 3.0).unwrap();
        assert_eq!(p.coefficients, vec![1.0]);
        assert!(allocation_rate(&p.coefficients, &[2.4e-32], 3.0).is_finite());
        assert_eq!(water_filling(&[1e-200f64], 3.0), Err(LinalgError::NoPositiveGain));
        let p = water_filling(&[1.0f64, 1e-30], 3.0).unwrap();
        assert_eq!(p.coefficients, vec![1.0, 0.0]);
    }

    #[test]
    fn zero_singular_value_gets_no_power() {
        let p = water_filling(&[2.0, 0.0], 100.0).unwrap();
        assert_eq!(p.coefficients, vec![1.0, 0.0]);
    }
}
