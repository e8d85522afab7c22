//! Measurement covariance of a plane approximation at a grid point.
//!
//! Each measurement point carries a Gaussian kernel; the covariance drops to
//! `r_min` at a point and rises with in-plane distance from all points:
//!
//! ```text
//! R = (r_max - r_min)/L · (1 - Σ_l exp(-α‖d_l‖²)) + r_min
//! ```
//!
//! With well separated kernels the far-field value is
//! `(r_max - r_min)/L + r_min`, which equals `r_max` only for `L = 1`.
//! Overlapping kernels can push the raw value below `r_min`, so the result
//! is clamped into `[r_min, r_max]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Plane, Vec3};
use crate::grid::GridSpec;
use crate::mask::BinaryMask;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CovarianceError {
    #[error("invalid covariance parameters: {0}")]
    InvalidParams(String),
    #[error("no measurement points")]
    NoPoints,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMode {
    /// Displacement within the approximation plane.
    PlaneProjected,
    /// Displacement in the xy-plane of the inertial frame.
    XyProjected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovarianceParams {
    pub r_min: f64,
    pub r_max: f64,
    /// Kernel sharpness (1/mm²).
    pub alpha: f64,
    pub distance_mode: DistanceMode,
}

impl Default for CovarianceParams {
    fn default() -> Self {
        Self {
            r_min: 10.0,
            r_max: 1e4,
            alpha: 0.1,
            distance_mode: DistanceMode::PlaneProjected,
        }
    }
}

impl CovarianceParams {
    pub fn validate(&self) -> Result<(), CovarianceError> {
        if !(self.r_min > 0.0) || !self.r_min.is_finite() {
            return Err(CovarianceError::InvalidParams(format!("r_min must be positive, got {}", self.r_min)));
        }
        if !(self.r_max > self.r_min) || !self.r_max.is_finite() {
            return Err(CovarianceError::InvalidParams(format!(
                "r_max must exceed r_min, got {} <= {}",
                self.r_max, self.r_min
            )));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(CovarianceError::InvalidParams(format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }

    /// Unclamped value far from every measurement point.
    pub fn far_field(&self, points: usize) -> f64 {
        (self.r_max - self.r_min) / points as f64 + self.r_min
    }
}

/// A validated plane + points pair that can be evaluated per cell without
/// further checks.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RbfKernel<'a> {
    plane: &'a Plane,
    points: &'a [Vec3],
    params: &'a CovarianceParams,
    weight: f64,
}

impl<'a> RbfKernel<'a> {
    pub(crate) fn new(
        plane: &'a Plane,
        points: &'a [Vec3],
        params: &'a CovarianceParams,
    ) -> Result<Self, CovarianceError> {
        params.validate()?;
        if points.is_empty() {
            return Err(CovarianceError::NoPoints);
        }
        if params.distance_mode == DistanceMode::PlaneProjected && !plane.is_height_map() {
            return Err(GeometryError::VerticalPlane(plane.normal.z.abs()).into());
        }
        Ok(Self {
            plane,
            points,
            params,
            weight: (params.r_max - params.r_min) / points.len() as f64,
        })
    }

    /// Raw covariance at grid point `(x, y)` whose plane height is `z_plane`.
    #[inline]
    pub(crate) fn raw(&self, x: f64, y: f64, z_plane: f64) -> f64 {
        let alpha = self.params.alpha;
        let sum: f64 = match self.params.distance_mode {
            DistanceMode::PlaneProjected => {
                let n = &self.plane.normal;
                let base = Vec3::new(x, y, z_plane);
                self.points
                    .iter()
                    .map(|p| {
                        let rel = p - base;
                        let d = rel - rel.dot(n) * n;
                        (-alpha * d.norm_squared()).exp()
                    })
                    .sum()
            }
            DistanceMode::XyProjected => self
                .points
                .iter()
                .map(|p| {
                    let dx = x - p.x;
                    let dy = y - p.y;
                    (-alpha * (dx * dx + dy * dy)).exp()
                })
                .sum(),
        };
        self.weight * (1.0 - sum) + self.params.r_min
    }

    #[inline]
    pub(crate) fn clamped(&self, x: f64, y: f64, z_plane: f64) -> f64 {
        self.raw(x, y, z_plane).clamp(self.params.r_min, self.params.r_max)
    }
}

fn plane_height_for(plane: &Plane, params: &CovarianceParams, x: f64, y: f64) -> Result<f64, GeometryError> {
    match params.distance_mode {
        DistanceMode::PlaneProjected => plane.height_at(x, y),
        // unused in xy mode
        DistanceMode::XyProjected => Ok(if plane.is_height_map() {
            plane.height_at(x, y)?
        } else {
            0.0
        }),
    }
}

/// Covariance of the plane approximation at `(x, y)`, clamped to `[r_min, r_max]`.
pub fn rbf_covariance(
    x: f64,
    y: f64,
    plane: &Plane,
    points: &[Vec3],
    params: &CovarianceParams,
) -> Result<f64, CovarianceError> {
    let kernel = RbfKernel::new(plane, points, params)?;
    let z = plane_height_for(plane, params, x, y)?;
    Ok(kernel.clamped(x, y, z))
}

/// Same as [`rbf_covariance`] without the final clamp.
pub fn rbf_covariance_raw(
    x: f64,
    y: f64,
    plane: &Plane,
    points: &[Vec3],
    params: &CovarianceParams,
) -> Result<f64, CovarianceError> {
    let kernel = RbfKernel::new(plane, points, params)?;
    let z = plane_height_for(plane, params, x, y)?;
    Ok(kernel.raw(x, y, z))
}

/// Covariance values for the set cells of a mask, in row-major cell order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CovarianceField {
    pub entries: Vec<((usize, usize), f64)>,
}

impl CovarianceField {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries.iter().find(|(ij, _)| *ij == (i, j)).map(|(_, r)| *r)
    }
}

pub fn covariance_field(
    mask: &BinaryMask,
    plane: &Plane,
    points: &[Vec3],
    params: &CovarianceParams,
) -> Result<CovarianceField, CovarianceError> {
    let kernel = RbfKernel::new(plane, points, params)?;
    let spec: &GridSpec = mask.spec();
    let mut entries = Vec::with_capacity(mask.count());
    for (i, j) in mask.iter_set() {
        let (x, y) = (spec.x(i), spec.y(j));
        let z = plane_height_for(plane, params, x, y)?;
        entries.push(((i, j), kernel.clamped(x, y, z)));
    }
    Ok(CovarianceField { entries })
}
