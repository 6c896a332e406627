//! First-order ratio filter on sensed vs modeled aerodynamic acceleration.

use serde::{Deserialize, Serialize};

/// Modeled accelerations below this (m/s^2) leave the filter unchanged.
pub const FILTER_GATE: f64 = 0.05;
pub const RATIO_MIN: f64 = 0.3;
pub const RATIO_MAX: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityFilterState {
    /// Estimated sensed/modeled acceleration ratio.
    pub ratio_est: f64,
    /// Weight of each new measurement.
    pub gain: f64,
}

impl Default for DensityFilterState {
    fn default() -> Self {
        Self { ratio_est: 1.0, gain: 0.1 }
    }
}

impl DensityFilterState {
    pub fn new(gain: f64) -> Self {
        Self { ratio_est: 1.0, gain }
    }
}

pub fn update_filter(fs: DensityFilterState, sensed_accel: f64, modeled_accel: f64) -> DensityFilterState {
    if !(modeled_accel > FILTER_GATE) || !sensed_accel.is_finite() {
        return fs;
    }
    let r = (1.0 - fs.gain) * fs.ratio_est + fs.gain * sensed_accel / modeled_accel;
    DensityFilterState { ratio_est: r.clamp(RATIO_MIN, RATIO_MAX), ..fs }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converges_geometrically_to_constant_ratio() {
        let mut fs = DensityFilterState::default();
        for k in 1..=50 {
            fs = update_filter(fs, 1.3 * 2.0, 2.0);
            let expected = 1.3 - 0.3 * 0.9f64.powi(k);
            assert!((fs.ratio_est - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_point_at_one_and_gate() {
        let fs = DensityFilterState { ratio_est: 2.0, gain: 0.1 };
        assert!(update_filter(fs, 1.0, 1.0).ratio_est < 2.0);
        assert_eq!(update_filter(fs, 5.0, 0.01), fs);
        assert_eq!(update_filter(fs, 1e3, 1.0).ratio_est, RATIO_MAX);
    }
}
