//! Binary update-region masks.
//!
//! A mask selects the grid cells that one plane approximation is allowed to
//! update. Membership is tested in 2D test coordinates chosen by
//! [`MaskFrame`]:
//!
//! * `InertialXy` uses `(x, y)` of grid points and measurement points as is.
//! * `Local` lifts each grid point onto the approximation plane (vertically,
//!   through the plane equation), expresses it in the local frame `{A}` and
//!   uses the local `(x, y)`. Measurement points are expressed in `{A}` and
//!   their local z is dropped.
//!
//! All tests are closed (boundary points are inside). Only a window of cells
//! around the shape is visited; it is derived from the shape's bounding box
//! in test coordinates, mapped back to the grid.

use std::io::{self, Write};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, LocalFrame, Plane, Vec3};
use crate::grid::GridSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("mask needs at least one measurement point")]
    NoPoints,
    #[error("triangle mask needs exactly 3 points, got {0}")]
    TriangleNeedsThreePoints(usize),
    #[error("invalid mask spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Roi,
    Triangle,
    LargestCircle,
    Cap,
}

impl MaskKind {
    pub const ALL: [MaskKind; 4] = [MaskKind::Triangle, MaskKind::LargestCircle, MaskKind::Cap, MaskKind::Roi];

    pub fn name(self) -> &'static str {
        match self {
            MaskKind::Roi => "roi",
            MaskKind::Triangle => "triangle",
            MaskKind::LargestCircle => "largest_circle",
            MaskKind::Cap => "cap",
        }
    }
}

impl std::str::FromStr for MaskKind {
    type Err = MaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "roi" => Ok(MaskKind::Roi),
            "triangle" => Ok(MaskKind::Triangle),
            "largest_circle" | "largest-circle" => Ok(MaskKind::LargestCircle),
            "cap" => Ok(MaskKind::Cap),
            other => Err(MaskError::InvalidSpec(format!("unknown mask kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameMode {
    #[serde(rename = "local-a")]
    LocalA,
    InertialXy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskSpec {
    pub kind: MaskKind,
    /// Disk radius for [`MaskKind::Cap`] (mm).
    pub cap_radius: f64,
    /// Dilation passes with the 3×3 structuring element.
    pub dilation_steps: usize,
    pub frame_mode: FrameMode,
}

impl Default for MaskSpec {
    fn default() -> Self {
        Self {
            kind: MaskKind::Triangle,
            cap_radius: 5.0,
            dilation_steps: 2,
            frame_mode: FrameMode::LocalA,
        }
    }
}

impl MaskSpec {
    pub fn validate(&self) -> Result<(), MaskError> {
        if self.kind == MaskKind::Cap && (!(self.cap_radius > 0.0) || !self.cap_radius.is_finite()) {
            return Err(MaskError::InvalidSpec(format!(
                "cap radius must be positive, got {}",
                self.cap_radius
            )));
        }
        Ok(())
    }
}

/// Where membership tests are evaluated.
#[derive(Debug, Clone, Copy)]
pub enum MaskFrame<'a> {
    InertialXy,
    Local { plane: &'a Plane, frame: &'a LocalFrame },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    spec: GridSpec,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(spec: GridSpec) -> Self {
        Self {
            spec,
            bits: vec![false; spec.len()],
        }
    }

    pub fn full(spec: GridSpec) -> Self {
        Self {
            spec,
            bits: vec![true; spec.len()],
        }
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(spec.len());
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                bits.push(f(i, j));
            }
        }
        Self { spec, bits }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn row(&self, j: usize) -> &[bool] {
        let nx = self.spec.nx;
        &self.bits[j * nx..(j + 1) * nx]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        i < self.spec.nx && j < self.spec.ny && self.bits[self.spec.offset(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        let k = self.spec.offset(i, j);
        self.bits[k] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_clear(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Set cells in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let nx = self.spec.nx;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(k, _)| (k % nx, k / nx))
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.len() == other.bits.len() && self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    pub fn union(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!(self.spec, other.spec, "mask specs differ");
        BinaryMask {
            spec: self.spec,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        }
    }

    /// Plain PBM (`P1`); rows are written in ascending `j`.
    pub fn write_pbm<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "P1")?;
        writeln!(w, "# surfmap mask, first row is j = 0 (y_min)")?;
        writeln!(w, "{} {}", self.spec.nx, self.spec.ny)?;
        for j in 0..self.spec.ny {
            let line: Vec<&str> = self.row(j).iter().map(|b| if *b { "1" } else { "0" }).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Maps grid points and measurement points into 2D test coordinates.
struct Projector<'a> {
    spec: &'a GridSpec,
    frame: MaskFrame<'a>,
}

impl<'a> Projector<'a> {
    fn new(spec: &'a GridSpec, frame: MaskFrame<'a>) -> Result<Self, MaskError> {
        if let MaskFrame::Local { plane, .. } = frame {
            if !plane.is_height_map() {
                return Err(GeometryError::VerticalPlane(plane.normal.z.abs()).into());
            }
        }
        Ok(Self { spec, frame })
    }

    #[inline]
    fn cell(&self, i: usize, j: usize) -> (f64, f64) {
        let (x, y) = (self.spec.x(i), self.spec.y(j));
        match self.frame {
            MaskFrame::InertialXy => (x, y),
            MaskFrame::Local { plane, frame } => {
                let q = frame.to_local(&Vec3::new(x, y, plane.height_unchecked(x, y)));
                (q.x, q.y)
            }
        }
    }

    fn point(&self, p: &Vec3) -> (f64, f64) {
        match self.frame {
            MaskFrame::InertialXy => (p.x, p.y),
            MaskFrame::Local { frame, .. } => {
                let q = frame.to_local(p);
                (q.x, q.y)
            }
        }
    }

    /// Cells whose test coordinates may fall in `[u_lo, u_hi] × [v_lo, v_hi]`.
    fn window(&self, u_lo: f64, u_hi: f64, v_lo: f64, v_hi: f64) -> Option<(RangeInclusive<usize>, RangeInclusive<usize>)> {
        let (x_lo, x_hi, y_lo, y_hi) = match self.frame {
            MaskFrame::InertialXy => (u_lo, u_hi, v_lo, v_hi),
            MaskFrame::Local { frame, .. } => {
                let corners = [(u_lo, v_lo), (u_hi, v_lo), (u_lo, v_hi), (u_hi, v_hi)]
                    .map(|(u, v)| frame.from_local(&Vec3::new(u, v, 0.0)));
                let fold = |f: fn(&Vec3) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
                    corners.iter().map(f).fold(init, pick)
                };
                (
                    fold(|c| c.x, f64::INFINITY, f64::min),
                    fold(|c| c.x, f64::NEG_INFINITY, f64::max),
                    fold(|c| c.y, f64::INFINITY, f64::min),
                    fold(|c| c.y, f64::NEG_INFINITY, f64::max),
                )
            }
        };
        let is = index_range(x_lo, x_hi, self.spec.x_min, self.spec.step_x(), self.spec.nx)?;
        let js = index_range(y_lo, y_hi, self.spec.y_min, self.spec.step_y(), self.spec.ny)?;
        Some((is, js))
    }

    fn fill(&self, window: Option<(RangeInclusive<usize>, RangeInclusive<usize>)>, inside: impl Fn(f64, f64) -> bool) -> BinaryMask {
        let mut mask = BinaryMask::empty(*self.spec);
        if let Some((is, js)) = window {
            for j in js {
                for i in is.clone() {
                    let (u, v) = self.cell(i, j);
                    if inside(u, v) {
                        mask.set(i, j, true);
                    }
                }
            }
        }
        mask
    }
}

/// Index range covering `[lo, hi]` padded by one cell, clipped to the grid.
fn index_range(lo: f64, hi: f64, origin: f64, step: f64, n: usize) -> Option<RangeInclusive<usize>> {
    if !lo.is_finite() || !hi.is_finite() {
        return None;
    }
    let a = ((lo - origin) / step).floor() - 1.0;
    let b = ((hi - origin) / step).ceil() + 1.0;
    if b < 0.0 || a > (n - 1) as f64 {
        return None;
    }
    let a = a.max(0.0) as usize;
    let b = (b as usize).min(n - 1);
    Some(a..=b)
}

fn bounds(coords: &[(f64, f64)]) -> (f64, f64, f64, f64) {
    coords.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(u, v)| (a.min(u), b.max(u), c.min(v), d.max(v)),
    )
}

/// Axis-aligned bounding box of the points.
pub fn roi_mask(spec: &GridSpec, points: &[Vec3], frame: MaskFrame<'_>) -> Result<BinaryMask, MaskError> {
    if points.is_empty() {
        return Err(MaskError::NoPoints);
    }
    let proj = Projector::new(spec, frame)?;
    let coords: Vec<_> = points.iter().map(|p| proj.point(p)).collect();
    let (u_lo, u_hi, v_lo, v_hi) = bounds(&coords);
    Ok(proj.fill(proj.window(u_lo, u_hi, v_lo, v_hi), |u, v| {
        u >= u_lo && u <= u_hi && v >= v_lo && v <= v_hi
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskWarning {
    /// The three points are collinear in test coordinates; the mask is empty.
    DegenerateTriangle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskBuild {
    pub mask: BinaryMask,
    pub warning: Option<MaskWarning>,
}

/// Triangle spanned by exactly three points, independent of vertex order.
pub fn triangle_mask(spec: &GridSpec, points: &[Vec3], frame: MaskFrame<'_>) -> Result<MaskBuild, MaskError> {
    if points.len() != 3 {
        return Err(MaskError::TriangleNeedsThreePoints(points.len()));
    }
    let proj = Projector::new(spec, frame)?;
    let p1 = proj.point(&points[0]);
    let mut p2 = proj.point(&points[1]);
    let mut p3 = proj.point(&points[2]);

    let area2 = (p2.0 - p1.0) * (p3.1 - p1.1) - (p2.1 - p1.1) * (p3.0 - p1.0);
    let scale = [p1, p2, p3]
        .iter()
        .zip([p2, p3, p1].iter())
        .map(|(a, b)| (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2))
        .fold(0.0, f64::max);
    if !(area2.abs() > 1e-12 * scale) {
        return Ok(MaskBuild {
            mask: BinaryMask::empty(*spec),
            warning: Some(MaskWarning::DegenerateTriangle),
        });
    }
    if area2 < 0.0 {
        std::mem::swap(&mut p2, &mut p3);
    }
    let edge = |a: (f64, f64), b: (f64, f64), u: f64, v: f64| (v - a.1) * (b.0 - a.0) - (b.1 - a.1) * (u - a.0);
    let (u_lo, u_hi, v_lo, v_hi) = bounds(&[p1, p2, p3]);
    let mask = proj.fill(proj.window(u_lo, u_hi, v_lo, v_hi), |u, v| {
        edge(p1, p2, u, v) >= 0.0 && edge(p2, p3, u, v) >= 0.0 && edge(p3, p1, u, v) >= 0.0
    });
    Ok(MaskBuild { mask, warning: None })
}

/// Disk centred on the points' centroid that reaches the farthest point.
pub fn largest_circle_mask(spec: &GridSpec, points: &[Vec3], frame: MaskFrame<'_>) -> Result<BinaryMask, MaskError> {
    if points.is_empty() {
        return Err(MaskError::NoPoints);
    }
    let proj = Projector::new(spec, frame)?;
    let coords: Vec<_> = points.iter().map(|p| proj.point(p)).collect();
    let n = coords.len() as f64;
    let cu = coords.iter().map(|c| c.0).sum::<f64>() / n;
    let cv = coords.iter().map(|c| c.1).sum::<f64>() / n;
    let r2 = coords
        .iter()
        .map(|c| (c.0 - cu).powi(2) + (c.1 - cv).powi(2))
        .fold(0.0, f64::max);
    let r = r2.sqrt();
    Ok(proj.fill(proj.window(cu - r, cu + r, cv - r, cv + r), |u, v| {
        (u - cu).powi(2) + (v - cv).powi(2) <= r2
    }))
}

/// Union of disks of radius `radius` around every point.
pub fn cap_mask(spec: &GridSpec, points: &[Vec3], radius: f64, frame: MaskFrame<'_>) -> Result<BinaryMask, MaskError> {
    if points.is_empty() {
        return Err(MaskError::NoPoints);
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(MaskError::InvalidSpec(format!("cap radius must be positive, got {radius}")));
    }
    let proj = Projector::new(spec, frame)?;
    let coords: Vec<_> = points.iter().map(|p| proj.point(p)).collect();
    let (u_lo, u_hi, v_lo, v_hi) = bounds(&coords);
    let r2 = radius * radius;
    Ok(proj.fill(
        proj.window(u_lo - radius, u_hi + radius, v_lo - radius, v_hi + radius),
        |u, v| coords.iter().any(|c| (u - c.0).powi(2) + (v - c.1).powi(2) <= r2),
    ))
}

/// Binary dilation with the 8-connected 3×3 element, applied `steps` times.
/// Equivalent to a single pass with a `(2·steps + 1)²` square, which is what
/// is computed here, separably along rows and then columns.
pub fn dilate(mask: &BinaryMask, steps: usize) -> BinaryMask {
    if steps == 0 || mask.is_clear() {
        return mask.clone();
    }
    let (nx, ny) = (mask.spec.nx, mask.spec.ny);
    let mut horizontal = vec![false; mask.bits.len()];
    let mut prefix = Vec::with_capacity(nx.max(ny) + 1);
    for j in 0..ny {
        dilate_line(|i| mask.bits[j * nx + i], nx, steps, &mut prefix, |i| horizontal[j * nx + i] = true);
    }
    let mut bits = vec![false; mask.bits.len()];
    for i in 0..nx {
        dilate_line(|j| horizontal[j * nx + i], ny, steps, &mut prefix, |j| bits[j * nx + i] = true);
    }
    BinaryMask { spec: mask.spec, bits }
}

fn dilate_line(
    get: impl Fn(usize) -> bool,
    n: usize,
    radius: usize,
    prefix: &mut Vec<usize>,
    mut set: impl FnMut(usize),
) {
    prefix.clear();
    prefix.push(0);
    for k in 0..n {
        let last = *prefix.last().unwrap();
        prefix.push(last + get(k) as usize);
    }
    if prefix[n] == 0 {
        return;
    }
    for k in 0..n {
        let lo = k.saturating_sub(radius);
        let hi = (k + radius).min(n - 1);
        if prefix[hi + 1] > prefix[lo] {
            set(k);
        }
    }
}

/// Builds the configured mask and applies its dilation.
pub fn build_mask(
    spec: &GridSpec,
    mask_spec: &MaskSpec,
    points: &[Vec3],
    frame: MaskFrame<'_>,
) -> Result<MaskBuild, MaskError> {
    mask_spec.validate()?;
    let raw = match mask_spec.kind {
        MaskKind::Roi => MaskBuild {
            mask: roi_mask(spec, points, frame)?,
            warning: None,
        },
        MaskKind::Triangle => triangle_mask(spec, points, frame)?,
        MaskKind::LargestCircle => MaskBuild {
            mask: largest_circle_mask(spec, points, frame)?,
            warning: None,
        },
        MaskKind::Cap => MaskBuild {
            mask: cap_mask(spec, points, mask_spec.cap_radius, frame)?,
            warning: None,
        },
    };
    Ok(MaskBuild {
        mask: dilate(&raw.mask, mask_spec.dilation_steps),
        warning: raw.warning,
    })
}
