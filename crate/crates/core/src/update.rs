//! One masked map update: every set mask cell gets the plane height as its
//! measurement and the RBF covariance as its measurement variance, then one
//! Kalman step. Unmasked cells are left untouched.
//!
//! Cells are independent, so rows are handed to worker threads freely; the
//! per-cell arithmetic is identical in every partitioning, which makes the
//! result bit-for-bit independent of the worker count.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use thiserror::Error;

use crate::covariance::{CovarianceError, CovarianceParams, RbfKernel};
use crate::geometry::{GeometryError, Plane, Vec3};
use crate::grid::{CellState, GridSpec, HeightGrid};
use crate::kf::{kf_step, KfError, KfParams};
use crate::mask::BinaryMask;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UpdateError {
    #[error("mask is {mask_nx}×{mask_ny} but grid is {grid_nx}×{grid_ny}")]
    MaskShapeMismatch {
        mask_nx: usize,
        mask_ny: usize,
        grid_nx: usize,
        grid_ny: usize,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Covariance(CovarianceError),
    #[error(transparent)]
    Filter(#[from] KfError),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

impl From<CovarianceError> for UpdateError {
    fn from(e: CovarianceError) -> Self {
        match e {
            CovarianceError::Geometry(g) => UpdateError::Geometry(g),
            other => UpdateError::Covariance(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub cells_touched: usize,
    /// Smallest and largest measurement covariance used, if any cell was touched.
    pub r_range: Option<(f64, f64)>,
}

impl UpdateStats {
    fn merge(self, other: UpdateStats) -> UpdateStats {
        UpdateStats {
            cells_touched: self.cells_touched + other.cells_touched,
            r_range: match (self.r_range, other.r_range) {
                (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.max(b.1))),
                (a, b) => a.or(b),
            },
        }
    }
}

/// Measurement and its covariance for grid point `(x, y)`.
#[inline]
fn cell_measurement(kernel: &RbfKernel<'_>, plane: &Plane, x: f64, y: f64) -> (f64, f64) {
    let z = plane.height_unchecked(x, y);
    (z, kernel.clamped(x, y, z))
}

fn update_row(
    spec: &GridSpec,
    j: usize,
    row: &mut [CellState],
    mask_row: &[bool],
    kernel: &RbfKernel<'_>,
    plane: &Plane,
    kf: &KfParams,
) -> UpdateStats {
    let mut stats = UpdateStats::default();
    let y = spec.y(j);
    for (i, (cell, _)) in row.iter_mut().zip(mask_row).enumerate().filter(|(_, (_, m))| **m) {
        let (z, r) = cell_measurement(kernel, plane, spec.x(i), y);
        *cell = kf_step(*cell, z, r, kf);
        stats = stats.merge(UpdateStats {
            cells_touched: 1,
            r_range: Some((r, r)),
        });
    }
    stats
}

/// Applies one plane approximation to the masked cells of `grid`.
#[derive(Debug)]
pub struct MapUpdater {
    covariance: CovarianceParams,
    kf: KfParams,
    pool: Option<ThreadPool>,
}

impl MapUpdater {
    /// `workers <= 1` runs on the calling thread.
    pub fn new(covariance: CovarianceParams, kf: KfParams, workers: usize) -> Result<Self, UpdateError> {
        covariance.validate()?;
        kf.validate()?;
        let pool = if workers > 1 {
            Some(
                ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| UpdateError::Pool(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Self { covariance, kf, pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    pub fn covariance(&self) -> &CovarianceParams {
        &self.covariance
    }

    pub fn kf(&self) -> &KfParams {
        &self.kf
    }

    pub fn apply(
        &self,
        grid: &mut HeightGrid,
        plane: &Plane,
        points: &[Vec3],
        mask: &BinaryMask,
    ) -> Result<UpdateStats, UpdateError> {
        let spec = *grid.spec();
        let mspec = mask.spec();
        if mspec.nx != spec.nx || mspec.ny != spec.ny {
            return Err(UpdateError::MaskShapeMismatch {
                mask_nx: mspec.nx,
                mask_ny: mspec.ny,
                grid_nx: spec.nx,
                grid_ny: spec.ny,
            });
        }
        if !plane.is_height_map() {
            return Err(GeometryError::VerticalPlane(plane.normal.z.abs()).into());
        }
        let kernel = RbfKernel::new(plane, points, &self.covariance)?;
        let kf = &self.kf;
        let nx = spec.nx;
        let cells = grid.cells_mut();

        let stats = match &self.pool {
            None => cells
                .chunks_mut(nx)
                .enumerate()
                .map(|(j, row)| update_row(&spec, j, row, mask.row(j), &kernel, plane, kf))
                .fold(UpdateStats::default(), UpdateStats::merge),
            Some(pool) => pool.install(|| {
                cells
                    .par_chunks_mut(nx)
                    .enumerate()
                    .filter(|(j, _)| mask.row(*j).iter().any(|b| *b))
                    .map(|(j, row)| update_row(&spec, j, row, mask.row(j), &kernel, plane, kf))
                    .reduce(UpdateStats::default, UpdateStats::merge)
            }),
        };
        Ok(stats)
    }
}

/// Single-threaded masked update.
pub fn masked_map_update(
    grid: &mut HeightGrid,
    plane: &Plane,
    points: &[Vec3],
    mask: &BinaryMask,
    covariance: &CovarianceParams,
    kf: &KfParams,
) -> Result<UpdateStats, UpdateError> {
    MapUpdater::new(*covariance, *kf, 1)?.apply(grid, plane, points, mask)
}
