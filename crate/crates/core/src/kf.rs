//! Scalar Kalman filter run independently in every grid cell, and the
//! distance trigger that decides which samples become map updates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::grid::CellState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KfError {
    #[error("measurement covariance must be positive and finite, got {0}")]
    NonPositiveR(f64),
    #[error("invalid filter parameters: {0}")]
    InvalidParams(String),
}

/// Transition `f`, observation gain `h` and process noise `q` of the cell
/// filter. The defaults describe a static surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KfParams {
    pub f: f64,
    pub h: f64,
    pub q: f64,
}

impl Default for KfParams {
    fn default() -> Self {
        Self { f: 1.0, h: 1.0, q: 0.0 }
    }
}

impl KfParams {
    pub fn validate(&self) -> Result<(), KfError> {
        if !self.f.is_finite() || !self.h.is_finite() || !self.q.is_finite() {
            return Err(KfError::InvalidParams("parameters must be finite".into()));
        }
        if self.h == 0.0 {
            return Err(KfError::InvalidParams("h must be nonzero".into()));
        }
        if self.q < 0.0 {
            return Err(KfError::InvalidParams(format!("q must be nonnegative, got {}", self.q)));
        }
        Ok(())
    }
}

/// One predict/correct cycle. `r` must already be positive.
#[inline]
pub(crate) fn kf_step(cell: CellState, z_meas: f64, r: f64, params: &KfParams) -> CellState {
    let z_prior = params.f * cell.z_hat;
    let p_prior = params.f * params.f * cell.p_hat + params.q;
    let s = r + params.h * params.h * p_prior;
    let gain = params.h * p_prior / s;
    CellState {
        z_hat: z_prior + gain * (z_meas - params.h * z_prior),
        // (1 - K h) P⁻ rewritten as R P⁻ / S, which avoids cancellation for diffuse priors
        p_hat: r * p_prior / s,
    }
}

/// Fuses measurement `z_meas` with variance `r` into `cell`.
pub fn kf_cell_update(cell: CellState, z_meas: f64, r: f64, params: &KfParams) -> Result<CellState, KfError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(KfError::NonPositiveR(r));
    }
    params.validate()?;
    Ok(kf_step(cell, z_meas, r, params))
}

/// Accepts a sample only once its centroid has moved more than
/// `min_travel` from the centroid of the last accepted sample.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateTrigger {
    last_centroid: Option<Vec3>,
    min_travel: f64,
}

impl UpdateTrigger {
    pub fn new(min_travel: f64) -> Result<Self, KfError> {
        if !(min_travel > 0.0) || !min_travel.is_finite() {
            return Err(KfError::InvalidParams(format!("min_travel must be positive, got {min_travel}")));
        }
        Ok(Self {
            last_centroid: None,
            min_travel,
        })
    }

    pub fn min_travel(&self) -> f64 {
        self.min_travel
    }

    pub fn last_centroid(&self) -> Option<Vec3> {
        self.last_centroid
    }

    /// Returns whether `centroid` should trigger an update, and records it
    /// as the new reference if so.
    pub fn should_update(&mut self, centroid: &Vec3) -> bool {
        let accept = match &self.last_centroid {
            None => true,
            Some(last) => (centroid - last).norm() > self.min_travel,
        };
        if accept {
            self.last_centroid = Some(*centroid);
        }
        accept
    }
}
