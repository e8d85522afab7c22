//! Simulated surface scanning: analytic ground-truth surfaces, a three-beam
//! laser rig on a robot end-effector, raster trajectories and a seeded
//! sensor noise model, producing [`MeasurementSample`](surfmap_core::MeasurementSample)
//! streams for the mapper.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod noise;
pub mod rig;
pub mod scan;
pub mod surface;
pub mod trajectory;

use thiserror::Error;

pub use noise::NoiseModel;
pub use rig::{Beam, SensorRig};
pub use scan::{simulate_poses, simulate_scan, ScanGap, ScanOutput};
pub use surface::{ray_intersect, CapOrientation, Derivatives, Rect, Shape, SurfaceModel};
pub use trajectory::{plan_raster, tool_orientation, PlannedPose, TrajectoryKind, TrajectoryPlan};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("({x}, {y}) is outside the surface domain")]
    OutOfDomain { x: f64, y: f64 },
    #[error("no surface intersection within sensor range")]
    NoIntersection,
    #[error("raster area is not inside the surface domain")]
    AreaOutsideDomain,
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
}
