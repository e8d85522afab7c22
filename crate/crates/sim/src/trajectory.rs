//! Boustrophedon raster trajectories.
//!
//! Lines run along x across the area at `y_min + k·line_spacing`, with
//! alternating direction and a straight transverse move between lines. The
//! path is sampled at constant speed, one pose every `1 / sample_rate` s.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};
use surfmap_core::{Pose, Vec3};

use crate::surface::{Rect, SurfaceModel};
use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    /// Flange at fixed `height`, tool axis vertical.
    ConstantHeight,
    /// Flange at `standoff` along the ground-truth normal, tool axis along
    /// the normal.
    SurfaceTracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryPlan {
    pub kind: TrajectoryKind,
    pub line_count: usize,
    /// Distance between lines (mm).
    pub line_spacing: f64,
    /// Path speed (mm/s).
    pub speed: f64,
    /// Samples per second.
    pub sample_rate: f64,
    /// Flange z for constant-height runs (mm).
    pub height: f64,
    /// Flange distance from the surface for tracking runs (mm).
    pub standoff: f64,
}

impl Default for TrajectoryPlan {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::ConstantHeight,
            line_count: 21,
            line_spacing: 5.0,
            speed: 25.0,
            sample_rate: 100.0,
            height: 108.0,
            standoff: 83.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedPose {
    pub timestamp: f64,
    pub pose: Pose,
}

impl TrajectoryPlan {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.line_spacing) || !positive(self.speed) || !positive(self.sample_rate) {
            return Err(SimError::InvalidParams(
                "line spacing, speed and sample rate must be positive".into(),
            ));
        }
        match self.kind {
            TrajectoryKind::ConstantHeight if !self.height.is_finite() => {
                Err(SimError::InvalidParams("height must be finite".into()))
            }
            TrajectoryKind::SurfaceTracking if !positive(self.standoff) => {
                Err(SimError::InvalidParams("standoff must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Distance between consecutive samples along the path (mm).
    pub fn sample_spacing(&self) -> f64 {
        self.speed / self.sample_rate
    }

    /// Distance between the first and the last line (mm).
    pub fn transverse_extent(&self) -> f64 {
        self.line_count.saturating_sub(1) as f64 * self.line_spacing
    }

    /// Corner points of the raster path in xy.
    pub fn waypoints(&self, area: &Rect) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(2 * self.line_count);
        for k in 0..self.line_count {
            let y = area.y_min + k as f64 * self.line_spacing;
            if k % 2 == 0 {
                pts.push((area.x_min, y));
                pts.push((area.x_max, y));
            } else {
                pts.push((area.x_max, y));
                pts.push((area.x_min, y));
            }
        }
        pts
    }
}

/// Tool orientation with z-axis along `normal` and x-axis as close to the
/// inertial x-axis as possible.
pub fn tool_orientation(normal: &Vec3) -> UnitQuaternion<f64> {
    let z = normal.normalize();
    let x = (Vec3::x() - Vec3::x().dot(&z) * z).normalize();
    let y = z.cross(&x);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    UnitQuaternion::from_rotation_matrix(&rot)
}

fn point_along(waypoints: &[(f64, f64)], cumulative: &[f64], s: f64) -> (f64, f64) {
    let seg = cumulative.partition_point(|&c| c <= s).clamp(1, waypoints.len() - 1);
    let (a, b) = (waypoints[seg - 1], waypoints[seg]);
    let len = cumulative[seg] - cumulative[seg - 1];
    let u = if len > 0.0 { ((s - cumulative[seg - 1]) / len).clamp(0.0, 1.0) } else { 0.0 };
    (a.0 + u * (b.0 - a.0), a.1 + u * (b.1 - a.1))
}

/// Poses along the raster over `area`. A path of zero length yields no
/// poses.
pub fn plan_raster(plan: &TrajectoryPlan, area: &Rect, model: &SurfaceModel) -> Result<Vec<PlannedPose>, SimError> {
    plan.validate()?;
    if !(area.x_max >= area.x_min) {
        return Err(SimError::InvalidParams("raster area is empty".into()));
    }
    if plan.line_count == 0 {
        return Ok(Vec::new());
    }
    let covered = Rect::new(area.x_min, area.x_max, area.y_min, area.y_min + plan.transverse_extent());
    if !model.domain.contains_rect(&covered) {
        return Err(SimError::AreaOutsideDomain);
    }
    let waypoints = plan.waypoints(area);
    let mut cumulative = Vec::with_capacity(waypoints.len());
    cumulative.push(0.0);
    for w in waypoints.windows(2) {
        let last = *cumulative.last().expect("nonempty");
        cumulative.push(last + (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1));
    }
    let total = *cumulative.last().expect("nonempty");
    if total <= 0.0 {
        return Ok(Vec::new());
    }

    let step = plan.sample_spacing();
    let count = (total / step + 1e-9).floor() as usize + 1;
    let mut poses = Vec::with_capacity(count);
    for m in 0..count {
        let s = (m as f64 * step).min(total);
        let (x, y) = point_along(&waypoints, &cumulative, s);
        let pose = match plan.kind {
            TrajectoryKind::ConstantHeight => Pose::identity_at(Vec3::new(x, y, plan.height)),
            TrajectoryKind::SurfaceTracking => {
                let (z, n) = model.surface_eval(x, y)?;
                Pose {
                    position: Vec3::new(x, y, z) + plan.standoff * n,
                    orientation: tool_orientation(&n),
                }
            }
        };
        poses.push(PlannedPose {
            timestamp: m as f64 / plan.sample_rate,
            pose,
        });
    }
    Ok(poses)
}
