//! Three tilted laser distance sensors on the end-effector.
//!
//! Sensors sit on a circle of radius `mount_radius` around the tool axis in
//! the flange plane. Each ray is tilted by `tilt_deg` from the tool axis
//! towards that axis, so all rays pass through one convergence point
//! `mount_radius / tan(tilt)` below the flange. With the default azimuths
//! 90°, 210°, 330° the last two sensors share a y-coordinate.

use serde::{Deserialize, Serialize};
use surfmap_core::{Pose, Vec3};

use crate::surface::{ray_intersect, SurfaceModel};
use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorRig {
    pub mount_radius: f64,
    pub tilt_deg: f64,
    pub azimuths_deg: [f64; 3],
    pub range_min: f64,
    pub range_max: f64,
    /// Datasheet resolution (mm).
    pub resolution: f64,
    /// Datasheet bound on the linearization error (mm).
    pub max_linearization_error: f64,
}

impl Default for SensorRig {
    fn default() -> Self {
        Self {
            mount_radius: 60.0,
            tilt_deg: 30.0,
            azimuths_deg: [90.0, 210.0, 330.0],
            range_min: 50.0,
            range_max: 300.0,
            resolution: 0.33,
            max_linearization_error: 1.0,
        }
    }
}

/// Mount point and unit beam direction in the end-effector frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beam {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl SensorRig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.tilt_deg > 0.0 && self.tilt_deg < 90.0) {
            return Err(SimError::InvalidParams(format!("tilt must be in (0, 90) deg, got {}", self.tilt_deg)));
        }
        if !(self.range_min >= 0.0 && self.range_min < self.range_max) {
            return Err(SimError::InvalidParams(format!(
                "sensor range [{}, {}] is empty",
                self.range_min, self.range_max
            )));
        }
        if !(self.mount_radius >= 0.0) || !(self.resolution >= 0.0) || !(self.max_linearization_error >= 0.0) {
            return Err(SimError::InvalidParams("rig dimensions must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn beams(&self) -> [Beam; 3] {
        let tilt = self.tilt_deg.to_radians();
        self.azimuths_deg.map(|az| {
            let (s, c) = az.to_radians().sin_cos();
            Beam {
                origin: Vec3::new(self.mount_radius * c, self.mount_radius * s, 0.0),
                direction: Vec3::new(-tilt.sin() * c, -tilt.sin() * s, -tilt.cos()),
            }
        })
    }

    /// Depth of the common beam point below the flange, along the tool axis.
    pub fn convergence_depth(&self) -> f64 {
        self.mount_radius / self.tilt_deg.to_radians().tan()
    }

    /// True distance measured by `beam` from `pose`; errors if the surface is
    /// not hit inside the sensor range.
    pub fn measure(&self, model: &SurfaceModel, pose: &Pose, beam: &Beam) -> Result<f64, SimError> {
        let origin = pose.transform_point(&beam.origin);
        let direction = pose.transform_vector(&beam.direction);
        let (_, t) = ray_intersect(model, &origin, &direction, self.range_max)?;
        if t < self.range_min {
            return Err(SimError::NoIntersection);
        }
        Ok(t)
    }

    /// Inertial point at `distance` along `beam` for the given pose.
    pub fn point_at(pose: &Pose, beam: &Beam, distance: f64) -> Vec3 {
        pose.transform_point(&beam.origin) + distance * pose.transform_vector(&beam.direction)
    }
}
