//! Height-grid mapping of freeform surfaces from sparse point triples.
//!
//! Each measurement sample (three or more surface points) is approximated by
//! a plane. The plane supplies a height measurement for every grid cell in an
//! update mask, weighted by a Gaussian-RBF covariance that grows with distance
//! from the measured points, and every cell runs its own scalar Kalman filter.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod evaluation;
pub mod geometry;
pub mod grid;
pub mod kf;
pub mod mask;
pub mod pipeline;
pub mod sample;
pub mod snapshot;
pub mod update;

pub use covariance::{covariance_field, rbf_covariance, rbf_covariance_raw, CovarianceField, CovarianceParams, DistanceMode};
pub use evaluation::{error_map, evaluate, EvalError, EvaluationConfig, EvaluationReport, HeightField};
pub use geometry::{build_local_frame, fit_plane_pca, plane_height_at, project_to_plane, GeometryError, LocalFrame, Plane, Vec3};
pub use grid::{CellState, GridError, GridSpec, HeightGrid};
pub use kf::{kf_cell_update, KfError, KfParams, UpdateTrigger};
pub use mask::{
    build_mask, cap_mask, dilate, largest_circle_mask, roi_mask, triangle_mask, BinaryMask, FrameMode, MaskBuild,
    MaskError, MaskFrame, MaskKind, MaskSpec, MaskWarning,
};
pub use pipeline::{Mapper, MapperConfig, SampleOutcome, SkipReason, UpdateRecord};
pub use sample::{MeasurementSample, Pose, SampleError, SampleReader};
pub use snapshot::{grid_from_snapshots, snapshot, Field, Snapshot, SnapshotError};
pub use update::{masked_map_update, MapUpdater, UpdateError, UpdateStats};
