//! Sample-by-sample mapping: trigger, plane fit, local frame, mask,
//! masked Kalman update. Samples are consumed strictly in order and each
//! accepted sample produces exactly one grid pass.

use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covariance::CovarianceParams;
use crate::geometry::{build_local_frame, fit_plane_pca, GeometryError, Plane, Vec3};
use crate::grid::HeightGrid;
use crate::kf::{KfError, KfParams, UpdateTrigger};
use crate::mask::{build_mask, FrameMode, MaskError, MaskFrame, MaskSpec, MaskWarning};
use crate::sample::MeasurementSample;
use crate::update::{MapUpdater, UpdateError, UpdateStats};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Filter(#[from] KfError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Update(#[from] UpdateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapperConfig {
    pub mask: MaskSpec,
    pub covariance: CovarianceParams,
    pub kf: KfParams,
    /// Minimum centroid travel between applied updates (mm).
    pub min_travel: f64,
    pub workers: usize,
}

impl Default for MapperConfig {
    fn default() -> Self {
        Self {
            mask: MaskSpec::default(),
            covariance: CovarianceParams::default(),
            kf: KfParams::default(),
            min_travel: 2.0,
            workers: 1,
        }
    }
}

/// Why an accepted sample did not change the map.
#[derive(Debug, Clone, PartialEq)]
pub enum SkipReason {
    Geometry(GeometryError),
    Mask(MaskError),
    Warning(MaskWarning),
}

impl std::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SkipReason::Geometry(e) => write!(f, "{e}"),
            SkipReason::Mask(e) => write!(f, "{e}"),
            SkipReason::Warning(MaskWarning::DegenerateTriangle) => write!(f, "degenerate triangle"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    /// Caller-supplied index of the sample (e.g. its stream line).
    pub sample_index: usize,
    pub timestamp: f64,
    pub centroid: Vec3,
    pub plane: Option<Plane>,
    pub stats: UpdateStats,
    pub skipped: Option<SkipReason>,
    pub wall_time: Duration,
}

impl UpdateRecord {
    pub fn is_applied(&self) -> bool {
        self.skipped.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleOutcome {
    /// The centroid has not travelled far enough since the last update.
    NotTriggered,
    Applied(UpdateRecord),
    Skipped(UpdateRecord),
}

pub const UPDATE_LOG_HEADER: &str = "sample,timestamp_s,centroid_x,centroid_y,centroid_z,cells_touched,r_min,r_max,wall_time_us,status";

impl UpdateRecord {
    pub fn csv_row(&self) -> String {
        let (r_lo, r_hi) = self
            .stats
            .r_range
            .map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
        let status = match &self.skipped {
            None => "applied".to_string(),
            Some(reason) => format!("skipped: {}", reason.to_string().replace(',', ";")),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.sample_index,
            self.timestamp,
            self.centroid.x,
            self.centroid.y,
            self.centroid.z,
            self.stats.cells_touched,
            r_lo,
            r_hi,
            self.wall_time.as_micros(),
            status
        )
    }
}

pub struct Mapper {
    grid: HeightGrid,
    trigger: UpdateTrigger,
    updater: MapUpdater,
    mask: MaskSpec,
    log: Vec<UpdateRecord>,
}

impl Mapper {
    pub fn new(grid: HeightGrid, config: &MapperConfig) -> Result<Self, PipelineError> {
        config.mask.validate()?;
        Ok(Self {
            grid,
            trigger: UpdateTrigger::new(config.min_travel)?,
            updater: MapUpdater::new(config.covariance, config.kf, config.workers)?,
            mask: config.mask,
            log: Vec::new(),
        })
    }

    pub fn grid(&self) -> &HeightGrid {
        &self.grid
    }

    pub fn into_grid(self) -> HeightGrid {
        self.grid
    }

    /// Accepted samples, applied or skipped, in order.
    pub fn log(&self) -> &[UpdateRecord] {
        &self.log
    }

    pub fn applied_updates(&self) -> usize {
        self.log.iter().filter(|r| r.is_applied()).count()
    }

    pub fn process(&mut self, sample_index: usize, sample: &MeasurementSample) -> SampleOutcome {
        let centroid = sample.centroid();
        if !self.trigger.should_update(&centroid) {
            return SampleOutcome::NotTriggered;
        }
        let start = Instant::now();
        let mut record = UpdateRecord {
            sample_index,
            timestamp: sample.timestamp,
            centroid,
            plane: None,
            stats: UpdateStats::default(),
            skipped: None,
            wall_time: Duration::ZERO,
        };
        match self.apply(sample, &mut record) {
            Ok(()) => debug!("sample {sample_index}: {} cells", record.stats.cells_touched),
            Err(reason) => {
                warn!("sample {sample_index} skipped: {reason}");
                record.skipped = Some(reason);
            }
        }
        record.wall_time = start.elapsed();
        self.log.push(record.clone());
        if record.is_applied() {
            SampleOutcome::Applied(record)
        } else {
            SampleOutcome::Skipped(record)
        }
    }

    fn apply(&mut self, sample: &MeasurementSample, record: &mut UpdateRecord) -> Result<(), SkipReason> {
        let points = &sample.points;
        let plane = fit_plane_pca(points).map_err(SkipReason::Geometry)?;
        if !plane.is_height_map() {
            return Err(SkipReason::Geometry(GeometryError::VerticalPlane(plane.normal.z.abs())));
        }
        record.plane = Some(plane);
        let frame = build_local_frame(&plane, &points[0]).map_err(SkipReason::Geometry)?;
        let mask_frame = match self.mask.frame_mode {
            FrameMode::LocalA => MaskFrame::Local {
                plane: &plane,
                frame: &frame,
            },
            FrameMode::InertialXy => MaskFrame::InertialXy,
        };
        let built = build_mask(self.grid.spec(), &self.mask, points, mask_frame).map_err(|e| match e {
            MaskError::Geometry(g) => SkipReason::Geometry(g),
            other => SkipReason::Mask(other),
        })?;
        if let Some(w) = built.warning {
            return Err(SkipReason::Warning(w));
        }
        record.stats = self
            .updater
            .apply(&mut self.grid, &plane, points, &built.mask)
            .map_err(|e| match e {
                UpdateError::Geometry(g) => SkipReason::Geometry(g),
                other => unreachable!("parameters were validated up front: {other}"),
            })?;
        Ok(())
    }
}
