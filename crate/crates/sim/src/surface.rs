//! Analytic ground-truth surfaces `z = g(x, y)` over a rectangular domain.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use surfmap_core::{HeightField, Vec3};

use crate::SimError;

/// Axis-aligned rectangle in the xy-plane (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self { x_min, x_max, y_min, y_max }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.x_min, other.y_min) && self.contains(other.x_max, other.y_max)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_min, self.y_max),
            (self.x_max, self.y_max),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapOrientation {
    /// Dome, highest at the centre.
    Bump,
    /// Bowl, lowest at the centre.
    Bowl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Shape {
    Flat {
        z: f64,
    },
    Ramp {
        z0: f64,
        slope_x: f64,
        slope_y: f64,
    },
    /// `offset + a_x sin(2πx/λ_x) + a_y sin(2πy/λ_y)`.
    Sinusoid {
        offset: f64,
        amplitude_x: f64,
        wavelength_x: f64,
        amplitude_y: f64,
        wavelength_y: f64,
    },
    /// Part of a sphere of radius `radius` whose apex is at
    /// `(center_x, center_y, apex_z)`.
    SphereCap {
        center_x: f64,
        center_y: f64,
        apex_z: f64,
        radius: f64,
        orientation: CapOrientation,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceModel {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default = "default_domain")]
    pub domain: Rect,
}

fn default_domain() -> Rect {
    Rect::new(0.0, 500.0, 0.0, 200.0)
}

/// First and second partial derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub gx: f64,
    pub gy: f64,
    pub gxx: f64,
    pub gxy: f64,
    pub gyy: f64,
}

impl Default for SurfaceModel {
    fn default() -> Self {
        Self::default_sinusoid()
    }
}

impl SurfaceModel {
    /// 500 × 200 mm part, 30 mm height span, smallest curvature radius
    /// 20 mm (reached at the crests and troughs along x).
    pub fn default_sinusoid() -> Self {
        let amplitude_x = 10.0;
        Self {
            shape: Shape::Sinusoid {
                offset: 25.0,
                amplitude_x,
                wavelength_x: 2.0 * PI * (20.0 * amplitude_x).sqrt(),
                amplitude_y: 5.0,
                wavelength_y: 125.0,
            },
            domain: default_domain(),
        }
    }

    pub fn flat(z: f64, domain: Rect) -> Self {
        Self {
            shape: Shape::Flat { z },
            domain,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let d = &self.domain;
        if !(d.x_max > d.x_min) || !(d.y_max > d.y_min) {
            return Err(SimError::InvalidParams("surface domain is empty".into()));
        }
        match self.shape {
            Shape::Sinusoid {
                wavelength_x,
                wavelength_y,
                ..
            } if !(wavelength_x > 0.0) || !(wavelength_y > 0.0) => {
                Err(SimError::InvalidParams("wavelengths must be positive".into()))
            }
            Shape::SphereCap {
                center_x,
                center_y,
                radius,
                ..
            } => {
                let reach = d
                    .corners()
                    .iter()
                    .map(|(x, y)| ((x - center_x).powi(2) + (y - center_y).powi(2)).sqrt())
                    .fold(0.0, f64::max);
                if reach >= radius {
                    Err(SimError::InvalidParams(format!(
                        "sphere radius {radius} does not cover the domain (needs > {reach})"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn check(&self, x: f64, y: f64) -> Result<(), SimError> {
        if self.domain.contains(x, y) {
            Ok(())
        } else {
            Err(SimError::OutOfDomain { x, y })
        }
    }

    /// Height without the domain check.
    pub fn height_unchecked(&self, x: f64, y: f64) -> f64 {
        match self.shape {
            Shape::Flat { z } => z,
            Shape::Ramp { z0, slope_x, slope_y } => z0 + slope_x * x + slope_y * y,
            Shape::Sinusoid {
                offset,
                amplitude_x,
                wavelength_x,
                amplitude_y,
                wavelength_y,
            } => {
                offset
                    + amplitude_x * (2.0 * PI * x / wavelength_x).sin()
                    + amplitude_y * (2.0 * PI * y / wavelength_y).sin()
            }
            Shape::SphereCap {
                center_x,
                center_y,
                apex_z,
                radius,
                orientation,
            } => {
                let r2 = (x - center_x).powi(2) + (y - center_y).powi(2);
                let sag = radius - (radius * radius - r2).sqrt();
                match orientation {
                    CapOrientation::Bump => apex_z - sag,
                    CapOrientation::Bowl => apex_z + sag,
                }
            }
        }
    }

    pub fn height(&self, x: f64, y: f64) -> Result<f64, SimError> {
        self.check(x, y)?;
        Ok(self.height_unchecked(x, y))
    }

    pub fn derivatives(&self, x: f64, y: f64) -> Result<Derivatives, SimError> {
        self.check(x, y)?;
        Ok(self.derivatives_unchecked(x, y))
    }

    fn derivatives_unchecked(&self, x: f64, y: f64) -> Derivatives {
        match self.shape {
            Shape::Flat { .. } => Derivatives {
                gx: 0.0,
                gy: 0.0,
                gxx: 0.0,
                gxy: 0.0,
                gyy: 0.0,
            },
            Shape::Ramp { slope_x, slope_y, .. } => Derivatives {
                gx: slope_x,
                gy: slope_y,
                gxx: 0.0,
                gxy: 0.0,
                gyy: 0.0,
            },
            Shape::Sinusoid {
                amplitude_x,
                wavelength_x,
                amplitude_y,
                wavelength_y,
                ..
            } => {
                let kx = 2.0 * PI / wavelength_x;
                let ky = 2.0 * PI / wavelength_y;
                Derivatives {
                    gx: amplitude_x * kx * (kx * x).cos(),
                    gy: amplitude_y * ky * (ky * y).cos(),
                    gxx: -amplitude_x * kx * kx * (kx * x).sin(),
                    gxy: 0.0,
                    gyy: -amplitude_y * ky * ky * (ky * y).sin(),
                }
            }
            Shape::SphereCap {
                center_x,
                center_y,
                radius,
                orientation,
                ..
            } => {
                // bump: g = apex - R + w, w = sqrt(R² - u² - v²)
                let (u, v) = (x - center_x, y - center_y);
                let w = (radius * radius - u * u - v * v).sqrt();
                let w3 = w * w * w;
                let sign = match orientation {
                    CapOrientation::Bump => 1.0,
                    CapOrientation::Bowl => -1.0,
                };
                Derivatives {
                    gx: -sign * u / w,
                    gy: -sign * v / w,
                    gxx: -sign * (radius * radius - v * v) / w3,
                    gxy: -sign * u * v / w3,
                    gyy: -sign * (radius * radius - u * u) / w3,
                }
            }
        }
    }

    /// Height and upward unit normal `normalize(-g_x, -g_y, 1)`.
    pub fn surface_eval(&self, x: f64, y: f64) -> Result<(f64, Vec3), SimError> {
        self.check(x, y)?;
        let d = self.derivatives_unchecked(x, y);
        Ok((self.height_unchecked(x, y), Vec3::new(-d.gx, -d.gy, 1.0).normalize()))
    }

    /// Largest absolute principal curvature at `(x, y)` (1/mm).
    pub fn max_principal_curvature(&self, x: f64, y: f64) -> Result<f64, SimError> {
        let d = self.derivatives(x, y)?;
        let w = 1.0 + d.gx * d.gx + d.gy * d.gy;
        let gauss = (d.gxx * d.gyy - d.gxy * d.gxy) / (w * w);
        let mean = ((1.0 + d.gy * d.gy) * d.gxx - 2.0 * d.gx * d.gy * d.gxy + (1.0 + d.gx * d.gx) * d.gyy)
            / (2.0 * w.powf(1.5));
        Ok(mean.abs() + (mean * mean - gauss).max(0.0).sqrt())
    }

    /// Smallest curvature radius found on a lattice of the given step over
    /// the domain; infinite for planes.
    pub fn min_curvature_radius(&self, step: f64) -> f64 {
        let d = &self.domain;
        let nx = (d.width() / step).ceil() as usize;
        let ny = (d.height() / step).ceil() as usize;
        let mut kappa: f64 = 0.0;
        for j in 0..=ny {
            let y = (d.y_min + j as f64 * step).min(d.y_max);
            for i in 0..=nx {
                let x = (d.x_min + i as f64 * step).min(d.x_max);
                kappa = kappa.max(self.max_principal_curvature(x, y).expect("lattice inside domain"));
            }
        }
        1.0 / kappa
    }

    /// Upper bound on `|∇g|` over the domain.
    pub fn max_slope(&self) -> f64 {
        match self.shape {
            Shape::Flat { .. } => 0.0,
            Shape::Ramp { slope_x, slope_y, .. } => slope_x.hypot(slope_y),
            Shape::Sinusoid {
                amplitude_x,
                wavelength_x,
                amplitude_y,
                wavelength_y,
                ..
            } => (amplitude_x * 2.0 * PI / wavelength_x).hypot(amplitude_y * 2.0 * PI / wavelength_y),
            Shape::SphereCap {
                center_x,
                center_y,
                radius,
                ..
            } => {
                let reach = self
                    .domain
                    .corners()
                    .iter()
                    .map(|(x, y)| (x - center_x).hypot(y - center_y))
                    .fold(0.0, f64::max);
                reach / (radius * radius - reach * reach).sqrt()
            }
        }
    }

    /// Highest point over the domain (upper bound for analytic shapes).
    pub fn max_height(&self) -> f64 {
        match self.shape {
            Shape::Flat { z } => z,
            Shape::Ramp { .. } => self
                .domain
                .corners()
                .iter()
                .map(|(x, y)| self.height_unchecked(*x, *y))
                .fold(f64::NEG_INFINITY, f64::max),
            Shape::Sinusoid {
                offset,
                amplitude_x,
                amplitude_y,
                ..
            } => offset + amplitude_x.abs() + amplitude_y.abs(),
            Shape::SphereCap {
                apex_z, orientation, ..
            } => match orientation {
                CapOrientation::Bump => apex_z,
                CapOrientation::Bowl => self
                    .domain
                    .corners()
                    .iter()
                    .map(|(x, y)| self.height_unchecked(*x, *y))
                    .fold(apex_z, f64::max),
            },
        }
    }
}

impl HeightField for SurfaceModel {
    fn height_at(&self, x: f64, y: f64) -> Option<f64> {
        self.height(x, y).ok()
    }
}

/// Along-ray bracketing tolerance (mm).
pub const RAY_TOLERANCE: f64 = 1e-9;
const MIN_MARCH_STEP: f64 = 0.05;

/// Parameter interval over which the ray's xy-projection lies inside `rect`.
fn clip_to_rect(origin: &Vec3, dir: &Vec3, rect: &Rect) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (o, d, lo, hi) in [(origin.x, dir.x, rect.x_min, rect.x_max), (origin.y, dir.y, rect.y_min, rect.y_max)] {
        if d == 0.0 {
            if o < lo || o > hi {
                return None;
            }
        } else {
            let (a, b) = ((lo - o) / d, (hi - o) / d);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

/// First crossing of the ray `origin + t·direction`, `0 <= t <= max_range`,
/// with the surface. Returns the hit point and `t`.
///
/// A ray starting outside the domain is followed from where it enters the
/// domain. The march steps by `f(t) / rate`, where `f` is the height of the
/// ray above the surface and `rate` bounds how fast `f` can fall, so no
/// crossing is skipped; the final bracket is refined by bisection.
pub fn ray_intersect(model: &SurfaceModel, origin: &Vec3, direction: &Vec3, max_range: f64) -> Result<(Vec3, f64), SimError> {
    let dir = direction.normalize();
    let above = |t: f64| -> Result<f64, SimError> {
        let p = origin + t * dir;
        Ok(p.z - model.height(p.x, p.y)?)
    };
    let Some((enter, exit)) = clip_to_rect(origin, &dir, &model.domain) else {
        return Err(SimError::OutOfDomain { x: origin.x, y: origin.y });
    };
    if exit < 0.0 || enter > max_range {
        return Err(SimError::OutOfDomain { x: origin.x, y: origin.y });
    }
    let start = enter.max(0.0);
    let end = exit.min(max_range);
    let f0 = above(start)?;
    if f0 <= 0.0 {
        return Err(SimError::NoIntersection);
    }
    let rate = -dir.z + model.max_slope() * dir.x.hypot(dir.y);
    if !(rate > 1e-12) {
        return Err(SimError::NoIntersection);
    }

    let (mut lo, mut f) = (start, f0);
    let mut hi = loop {
        if lo >= end {
            return if end < max_range {
                let p = origin + exit * dir;
                Err(SimError::OutOfDomain { x: p.x, y: p.y })
            } else {
                Err(SimError::NoIntersection)
            };
        }
        let t = (lo + (f / rate).max(MIN_MARCH_STEP)).min(end);
        let ft = above(t)?;
        if ft <= 0.0 {
            break t;
        }
        lo = t;
        f = ft;
    };
    while hi - lo > RAY_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if above(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok((origin + t * dir, t))
}
