//! Detector-side quantities: power contrast, SNR contrast, bit error rate,
//! captured SNR and outage probability.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("power must be non-negative and finite, got {0}")]
    NegativePower(f64),
    #[error("empty sample list")]
    Empty,
    #[error("noise power must be positive, got {0}")]
    InvalidNoise(f64),
    #[error("reference transmit power must be positive, got {0}")]
    InvalidReference(f64),
    #[error("BER target must lie in (0, 0.5), got {0}")]
    InvalidBerTarget(f64),
}

pub const DEFAULT_THRESHOLD_DB: f64 = 3.4;
pub const DEFAULT_BER_TARGET: f64 = 1e-2;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Noise power, transmit SNR, and the scalar that maps solver powers (for a
/// fixed feed) onto that transmit SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub p_noise_w: f64,
    pub snr_tx_db: f64,
    pub calibration: f64,
}

impl LinkBudget {
    /// Budget where solver powers are used as-is.
    pub fn uncalibrated(p_noise_w: f64) -> Result<Self, MetricsError> {
        if !(p_noise_w > 0.0 && p_noise_w.is_finite()) {
            return Err(MetricsError::InvalidNoise(p_noise_w));
        }
        Ok(Self {
            p_noise_w,
            snr_tx_db: linear_to_db(1.0 / p_noise_w),
            calibration: 1.0,
        })
    }

    /// Scales powers so that the reference transmit power `p_tx_ref` (from
    /// the solver's feed) corresponds to `snr_tx_db` over the noise.
    pub fn calibrated(p_noise_w: f64, snr_tx_db: f64, p_tx_ref: f64) -> Result<Self, MetricsError> {
        if !(p_noise_w > 0.0 && p_noise_w.is_finite()) {
            return Err(MetricsError::InvalidNoise(p_noise_w));
        }
        if !(p_tx_ref > 0.0 && p_tx_ref.is_finite()) {
            return Err(MetricsError::InvalidReference(p_tx_ref));
        }
        Ok(Self {
            p_noise_w,
            snr_tx_db,
            calibration: db_to_linear(snr_tx_db) * p_noise_w / p_tx_ref,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionThreshold {
    pub delta_snr_target_db: f64,
    pub ber_target: f64,
}

impl Default for DetectionThreshold {
    fn default() -> Self {
        Self {
            delta_snr_target_db: DEFAULT_THRESHOLD_DB,
            ber_target: DEFAULT_BER_TARGET,
        }
    }
}

impl DetectionThreshold {
    pub fn new(delta_snr_target_db: f64, ber_target: f64) -> Result<Self, MetricsError> {
        if !(ber_target > 0.0 && ber_target < 0.5) {
            return Err(MetricsError::InvalidBerTarget(ber_target));
        }
        Ok(Self {
            delta_snr_target_db,
            ber_target,
        })
    }

    /// Contrast (dB) at which the BER formula reaches `ber_target`.
    pub fn ber_implied_target_db(&self) -> f64 {
        linear_to_db(delta_snr_for_ber(self.ber_target))
    }
}

fn check_power(p: f64) -> Result<(), MetricsError> {
    if p >= 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(MetricsError::NegativePower(p))
    }
}

/// `|P_on − P_off|`.
pub fn delta_power(p_on: f64, p_off: f64) -> Result<f64, MetricsError> {
    check_power(p_on)?;
    check_power(p_off)?;
    Ok((p_on - p_off).abs())
}

/// Calibrated `ΔP / P_noise`, linear.
pub fn delta_snr(delta_p: f64, budget: &LinkBudget) -> f64 {
    budget.calibration * delta_p / budget.p_noise_w
}

/// `½ erfc(ΔSNR)` with a linear contrast.
pub fn ber_from_delta_snr(ds: f64) -> f64 {
    0.5 * libm::erfc(ds)
}

/// Inverse of [`ber_from_delta_snr`] on `(0, 0.5)`, by bisection.
pub fn delta_snr_for_ber(ber: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 30.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ber_from_delta_snr(mid) > ber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `10 log10(cal · mean(P_off) / P_noise)`.
pub fn snr_captured(p_off_samples: &[f64], budget: &LinkBudget) -> Result<f64, MetricsError> {
    if p_off_samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    for &p in p_off_samples {
        check_power(p)?;
    }
    let mut sorted = p_off_samples.to_vec();
    // Summing in sorted order makes the mean independent of sample order.
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Ok(linear_to_db(budget.calibration * mean / budget.p_noise_w))
}

/// Fraction of contrasts (dB) strictly below the target.
pub fn outage_probability(delta_snr_db: &[f64], threshold: &DetectionThreshold) -> Result<f64, MetricsError> {
    if delta_snr_db.is_empty() {
        return Err(MetricsError::Empty);
    }
    let below = delta_snr_db
        .iter()
        .filter(|&&v| v < threshold.delta_snr_target_db)
        .count();
    Ok(below as f64 / delta_snr_db.len() as f64)
}
