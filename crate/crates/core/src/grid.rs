//! The global height map: a dense `nx × ny` lattice of scalar Kalman states.
//!
//! Grid point `(i, j)` sits at `x_i = x_min + i·h_x`, `y_j = y_min + j·h_y`
//! with `h_x = (x_max - x_min)/nx` and `h_y = (y_max - y_min)/ny`, so the
//! upper bounds `x_max`, `y_max` are not themselves grid points. Cells are
//! stored row-major with `j` (y) as the row index.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Initial height of unmapped cells (mm).
pub const DEFAULT_Z0: f64 = 0.0;
/// Initial variance of unmapped cells (mm²); above the evaluation threshold.
pub const DEFAULT_P0: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("invalid initial state: {0}")]
    InvalidInitialState(String),
    #[error("({x}, {y}) lies outside the grid extent")]
    CoordOutOfBounds { x: f64, y: f64 },
    #[error("index ({i}, {j}) outside {nx}×{ny} grid")]
    IndexOutOfBounds { i: usize, j: usize, nx: usize, ny: usize },
    #[error("expected {expected} cells, got {got}")]
    SizeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self, GridError> {
        let spec = Self {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Grid over the rectangle with (approximately) the requested step; the
    /// cell count is the rounded extent/step ratio.
    pub fn with_step(x_min: f64, x_max: f64, y_min: f64, y_max: f64, step: f64) -> Result<Self, GridError> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(GridError::InvalidSpec(format!("step must be positive, got {step}")));
        }
        let nx = ((x_max - x_min) / step).round();
        let ny = ((y_max - y_min) / step).round();
        if !(nx >= 1.0 && ny >= 1.0) {
            return Err(GridError::InvalidSpec("extent smaller than one step".into()));
        }
        Self::new(x_min, x_max, y_min, y_max, nx as usize, ny as usize)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(GridError::InvalidSpec("bounds must be finite".into()));
        }
        if !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return Err(GridError::InvalidSpec("need x_max > x_min and y_max > y_min".into()));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(GridError::InvalidSpec("cell counts must be at least 1".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn step_x(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    #[inline]
    pub fn step_y(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat row-major offset of `(i, j)`.
    #[inline]
    pub fn offset(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.step_x() * i as f64 + self.x_min
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.step_y() * j as f64 + self.y_min
    }

    pub fn index_to_coord(&self, i: usize, j: usize) -> Result<(f64, f64), GridError> {
        if i >= self.nx || j >= self.ny {
            return Err(GridError::IndexOutOfBounds {
                i,
                j,
                nx: self.nx,
                ny: self.ny,
            });
        }
        Ok((self.x(i), self.y(j)))
    }

    /// Nearest grid index to `(x, y)`, rounding halfway cases toward the
    /// lower index. Coordinates between the last grid point and `x_max`
    /// (resp. `y_max`) map to the last index.
    pub fn coord_to_nearest_index(&self, x: f64, y: f64) -> Result<(usize, usize), GridError> {
        let inside = x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max;
        if !inside {
            return Err(GridError::CoordOutOfBounds { x, y });
        }
        let i = nearest_lower_tie((x - self.x_min) / self.step_x()).min(self.nx - 1);
        let j = nearest_lower_tie((y - self.y_min) / self.step_y()).min(self.ny - 1);
        Ok((i, j))
    }
}

/// `round(t)` with exact halves going down; `t >= 0`.
#[inline]
fn nearest_lower_tie(t: f64) -> usize {
    (t - 0.5).ceil().max(0.0) as usize
}

/// Posterior state of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub z_hat: f64,
    pub p_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeightGrid {
    spec: GridSpec,
    cells: Vec<CellState>,
}

impl HeightGrid {
    pub fn new(spec: GridSpec, z0: f64, p0: f64) -> Result<Self, GridError> {
        spec.validate()?;
        if !z0.is_finite() {
            return Err(GridError::InvalidInitialState(format!("z0 = {z0}")));
        }
        if !(p0 > 0.0) || !p0.is_finite() {
            return Err(GridError::InvalidInitialState(format!("P0 must be positive, got {p0}")));
        }
        Ok(Self {
            spec,
            cells: vec![CellState { z_hat: z0, p_hat: p0 }; spec.len()],
        })
    }

    /// Grid from explicit row-major cell states.
    pub fn from_cells(spec: GridSpec, cells: Vec<CellState>) -> Result<Self, GridError> {
        spec.validate()?;
        if cells.len() != spec.len() {
            return Err(GridError::SizeMismatch {
                expected: spec.len(),
                got: cells.len(),
            });
        }
        if let Some(bad) = cells
            .iter()
            .find(|c| !c.z_hat.is_finite() || !c.p_hat.is_finite() || c.p_hat < 0.0)
        {
            return Err(GridError::InvalidInitialState(format!("{bad:?}")));
        }
        Ok(Self { spec, cells })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub(crate) fn cells_mut(&mut self) -> &mut [CellState] {
        &mut self.cells
    }

    pub fn cell(&self, i: usize, j: usize) -> Option<&CellState> {
        if i < self.spec.nx && j < self.spec.ny {
            Some(&self.cells[self.spec.offset(i, j)])
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_grid_holds_initial_state() {
        let spec = GridSpec::new(0.0, 10.0, 0.0, 10.0, 10, 10).unwrap();
        let grid = HeightGrid::new(spec, 0.0, 1e6).unwrap();
        assert!(grid.cells().iter().all(|c| *c == CellState { z_hat: 0.0, p_hat: 1e6 }));
        let single = HeightGrid::new(GridSpec::new(0.0, 1.0, 0.0, 1.0, 1, 1).unwrap(), 2.0, 1.0).unwrap();
        assert_eq!(single.cells().len(), 1);
    }

    #[test]
    fn scan_area_at_two_millimetres() {
        let spec = GridSpec::with_step(50.0, 450.0, 50.0, 150.0, 2.0).unwrap();
        assert_eq!((spec.nx, spec.ny), (200, 50));
        assert_eq!(spec.step_x(), 2.0);
    }

    #[test]
    fn invalid_specs() {
        assert!(GridSpec::new(1.0, 1.0, 0.0, 1.0, 1, 1).is_err());
        assert!(GridSpec::new(0.0, 1.0, 0.0, 1.0, 0, 1).is_err());
        assert!(GridSpec::new(0.0, f64::NAN, 0.0, 1.0, 1, 1).is_err());
        let spec = GridSpec::new(0.0, 1.0, 0.0, 1.0, 1, 1).unwrap();
        assert!(HeightGrid::new(spec, 0.0, 0.0).is_err());
    }

    #[test]
    fn coordinate_round_trip() {
        let spec = GridSpec::new(-3.5, 17.0, 2.0, 9.5, 41, 15).unwrap();
        assert_eq!(spec.index_to_coord(0, 0).unwrap(), (-3.5, 2.0));
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let (x, y) = spec.index_to_coord(i, j).unwrap();
                assert_eq!(spec.coord_to_nearest_index(x, y).unwrap(), (i, j));
            }
        }
        assert!(spec.index_to_coord(41, 0).is_err());
        assert!(spec.coord_to_nearest_index(17.01, 3.0).is_err());
        assert_eq!(spec.coord_to_nearest_index(17.0, 9.5).unwrap(), (40, 14));
    }

    #[test]
    fn halfway_rounds_down() {
        let spec = GridSpec::new(0.0, 20.0, 0.0, 1.0, 10, 1).unwrap();
        assert_eq!(spec.coord_to_nearest_index(7.0, 0.0).unwrap().0, 3);
        // exhaustive scan over the row at quarter steps
        for k in 0..=76 {
            let x = k as f64 * 0.25;
            let i = spec.coord_to_nearest_index(x, 0.0).unwrap().0;
            let best = (0..10)
                .min_by(|a, b| {
                    let da = (spec.x(*a) - x).abs();
                    let db = (spec.x(*b) - x).abs();
                    da.total_cmp(&db).then(a.cmp(b))
                })
                .unwrap();
            assert_eq!(i, best, "x = {x}");
        }
    }
}
