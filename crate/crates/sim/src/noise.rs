//! Sensor and pose error model.
//!
//! A true distance `d` is turned into a reading by, in order: a per-sensor
//! bias `a·sin(2πd/period + φ_s)` with a random phase per sensor, additive
//! Gaussian white noise, and rounding to the sensor quantum. The reading is
//! paired with a pose that may be `pose_delay` samples old and perturbed by
//! Gaussian position and rotation noise.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub seed: u64,
    /// Reading quantum (mm); 0 disables quantization.
    pub quantum: f64,
    /// Bias amplitude (mm).
    pub bias_amplitude: f64,
    /// Bias period in measured distance (mm).
    pub bias_period: f64,
    /// White-noise standard deviation (mm).
    pub white_sigma: f64,
    /// Pose position noise standard deviation (mm).
    pub pose_position_sigma: f64,
    /// Pose rotation noise standard deviation (rad).
    pub pose_rotation_sigma: f64,
    /// Readings are paired with the pose this many samples earlier.
    pub pose_delay: usize,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            seed: 42,
            quantum: 0.33,
            bias_amplitude: 0.5,
            bias_period: 100.0,
            white_sigma: 0.05,
            pose_position_sigma: 0.0,
            pose_rotation_sigma: 0.0,
            pose_delay: 0,
        }
    }
}

impl NoiseModel {
    /// Exact readings and poses.
    pub fn none() -> Self {
        Self {
            seed: 0,
            quantum: 0.0,
            bias_amplitude: 0.0,
            bias_period: 100.0,
            white_sigma: 0.0,
            pose_position_sigma: 0.0,
            pose_rotation_sigma: 0.0,
            pose_delay: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            ("quantum", self.quantum),
            ("bias_amplitude", self.bias_amplitude),
            ("white_sigma", self.white_sigma),
            ("pose_position_sigma", self.pose_position_sigma),
            ("pose_rotation_sigma", self.pose_rotation_sigma),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(SimError::InvalidParams(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(self.bias_period > 0.0) {
            return Err(SimError::InvalidParams(format!(
                "bias_period must be positive, got {}",
                self.bias_period
            )));
        }
        Ok(())
    }

    pub fn bias(&self, distance: f64, phase: f64) -> f64 {
        self.bias_amplitude * (2.0 * PI * distance / self.bias_period + phase).sin()
    }

    pub fn quantize(&self, distance: f64) -> f64 {
        if self.quantum > 0.0 {
            (distance / self.quantum).round() * self.quantum
        } else {
            distance
        }
    }

    /// Reading for a true distance, given the sensor's bias phase and a
    /// standard-normal draw.
    pub fn reading(&self, distance: f64, phase: f64, standard_normal: f64) -> f64 {
        self.quantize(distance + self.bias(distance, phase) + self.white_sigma * standard_normal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn none_is_identity() {
        let n = NoiseModel::none();
        for d in [50.0, 81.234567, 299.9] {
            assert_eq!(n.reading(d, 1.3, 0.7), d);
        }
    }

    #[test]
    fn quantized_readings_are_multiples() {
        let n = NoiseModel::default();
        for k in 0..1000 {
            let r = n.reading(50.0 + k as f64 * 0.173, 0.4, ((k % 7) as f64 - 3.0) / 3.0);
            assert_eq!((r / n.quantum).round() * n.quantum, r);
        }
    }

    #[test]
    fn bias_is_bounded() {
        let n = NoiseModel {
            bias_amplitude: 1.0,
            ..NoiseModel::default()
        };
        for k in 0..1000 {
            assert!(n.bias(k as f64 * 0.3, 2.0).abs() <= 1.0);
        }
    }

    #[test]
    fn validation() {
        assert!(NoiseModel::default().validate().is_ok());
        let bad = NoiseModel {
            white_sigma: -1.0,
            ..NoiseModel::default()
        };
        assert!(bad.validate().is_err());
        let bad = NoiseModel {
            bias_period: 0.0,
            ..NoiseModel::default()
        };
        assert!(bad.validate().is_err());
    }
}
