//! Comparison of a mapped grid against a ground-truth height field.
//!
//! Ground truth is sampled on an equidistant lattice starting at the grid
//! origin. Each sample is paired with its nearest grid cell (halfway ties go
//! to the lower index) and only cells with `P̂ <= cov_threshold` count. The
//! reported standard deviation is the population standard deviation of the
//! signed errors `ẑ - z̄`.

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::HeightGrid;
use crate::mask::MaskKind;
use crate::snapshot::{Field, Snapshot};

/// Ground truth height; `None` outside its domain.
pub trait HeightField {
    fn height_at(&self, x: f64, y: f64) -> Option<f64>;
}

impl<F: Fn(f64, f64) -> Option<f64>> HeightField for F {
    fn height_at(&self, x: f64, y: f64) -> Option<f64> {
        self(x, y)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no grid cell passed the covariance filter ({excluded} samples excluded)")]
    NoCountedCells { excluded: usize },
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Ground-truth lattice spacing (mm).
    pub spacing: f64,
    /// Cells with a larger posterior variance are excluded.
    pub cov_threshold: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            spacing: 5.0,
            cov_threshold: 1e4,
        }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(EvalError::InvalidConfig(format!("spacing must be positive, got {}", self.spacing)));
        }
        if !(self.cov_threshold > 0.0) {
            return Err(EvalError::InvalidConfig(format!(
                "covariance threshold must be positive, got {}",
                self.cov_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mask: Option<MaskKind>,
    pub mean_abs_err: f64,
    pub max_abs_err: f64,
    pub std_dev: f64,
    pub counted: usize,
    pub excluded: usize,
}

pub const REPORT_CSV_HEADER: &str = "mask,mean_abs_err_mm,max_abs_err_mm,std_dev_mm,counted,excluded";

impl EvaluationReport {
    pub fn with_mask(mut self, mask: MaskKind) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn total(&self) -> usize {
        self.counted + self.excluded
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.mask.map_or("-", MaskKind::name),
            self.mean_abs_err,
            self.max_abs_err,
            self.std_dev,
            self.counted,
            self.excluded
        )
    }
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<15} {:>9.3} {:>9.3} {:>9.3} {:>8} {:>8}",
            self.mask.map_or("-", MaskKind::name),
            self.mean_abs_err,
            self.max_abs_err,
            self.std_dev,
            self.counted,
            self.excluded
        )
    }
}

/// Human-readable table; std is the population standard deviation.
pub fn write_report_table<W: Write>(mut w: W, reports: &[EvaluationReport]) -> io::Result<()> {
    writeln!(
        w,
        "{:<15} {:>9} {:>9} {:>9} {:>8} {:>8}",
        "mask", "mean [mm]", "max [mm]", "std [mm]", "counted", "excluded"
    )?;
    for r in reports {
        writeln!(w, "{r}")?;
    }
    Ok(())
}

pub fn write_report_csv<W: Write>(mut w: W, reports: &[EvaluationReport]) -> io::Result<()> {
    writeln!(w, "{REPORT_CSV_HEADER}")?;
    for r in reports {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Sample coordinates `origin + k·spacing` up to `last` (inclusive, with a
/// small tolerance for accumulated rounding).
fn lattice(origin: f64, last: f64, spacing: f64) -> impl Iterator<Item = f64> {
    let count = ((last - origin) / spacing + 1e-9).floor() as usize + 1;
    (0..count).map(move |k| origin + k as f64 * spacing)
}

/// Signed errors `ẑ - z̄` of counted samples, plus the number excluded.
pub fn sample_errors(grid: &HeightGrid, truth: &impl HeightField, config: &EvaluationConfig) -> Result<(Vec<f64>, usize), EvalError> {
    config.validate()?;
    let spec = grid.spec();
    let x_last = spec.x(spec.nx - 1);
    let y_last = spec.y(spec.ny - 1);
    let mut errors = Vec::new();
    let mut excluded = 0;
    for y in lattice(spec.y_min, y_last, config.spacing) {
        for x in lattice(spec.x_min, x_last, config.spacing) {
            let (i, j) = spec
                .coord_to_nearest_index(x, y)
                .expect("lattice lies inside the grid extent");
            let cell = grid.cell(i, j).expect("index from the grid spec");
            match truth.height_at(x, y) {
                Some(z_true) if cell.p_hat <= config.cov_threshold => errors.push(cell.z_hat - z_true),
                _ => excluded += 1,
            }
        }
    }
    Ok((errors, excluded))
}

pub fn evaluate(grid: &HeightGrid, truth: &impl HeightField, config: &EvaluationConfig) -> Result<EvaluationReport, EvalError> {
    let (errors, excluded) = sample_errors(grid, truth, config)?;
    if errors.is_empty() {
        return Err(EvalError::NoCountedCells { excluded });
    }
    let n = errors.len() as f64;
    let mean_abs_err = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
    let max_abs_err = errors.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    Ok(EvaluationReport {
        mask: None,
        mean_abs_err,
        max_abs_err,
        std_dev: var.sqrt(),
        counted: errors.len(),
        excluded,
    })
}

/// Per-cell `ẑ - z̄` at the cell coordinates; NaN where the cell's variance
/// exceeds `cov_threshold` or truth is undefined.
pub fn error_map(grid: &HeightGrid, truth: &impl HeightField, cov_threshold: f64) -> Snapshot {
    let spec = *grid.spec();
    let mut values = Vec::with_capacity(spec.len());
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let cell = grid.cell(i, j).expect("in range");
            let v = match truth.height_at(spec.x(i), spec.y(j)) {
                Some(z) if cell.p_hat <= cov_threshold => cell.z_hat - z,
                _ => f64::NAN,
            };
            values.push(v);
        }
    }
    Snapshot {
        spec,
        field: Field::Error,
        values,
    }
}
