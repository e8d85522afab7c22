//! Dense exports of grid fields.
//!
//! Two formats share the same layout: `ny` rows (y index `j`) of `nx`
//! values (x index `i`).
//!
//! * CSV: `#`-prefixed header lines carrying the grid spec, then one line per
//!   row. Missing values are written as empty fields.
//! * Binary: little-endian `f64`, row-major, no header, plus a JSON sidecar
//!   (`<name>.json`) holding the field name and grid spec. Missing values are
//!   NaN.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{CellState, GridError, GridSpec, HeightGrid};

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed snapshot: {0}")]
    Format(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Height,
    Covariance,
    Error,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::Height => "height",
            Field::Covariance => "covariance",
            Field::Error => "error",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "height" => Some(Field::Height),
            "covariance" => Some(Field::Covariance),
            "error" => Some(Field::Error),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub spec: GridSpec,
    pub field: Field,
    /// Row-major, `values[j * nx + i]`.
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    field: Field,
    layout: String,
    dtype: String,
    spec: GridSpec,
}

const LAYOUT: &str = "row-major; row j = y index, column i = x index";

impl Snapshot {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.offset(i, j)]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let s = &self.spec;
        writeln!(w, "# surfmap snapshot field={}", self.field.name())?;
        writeln!(
            w,
            "# x_min={} x_max={} y_min={} y_max={} nx={} ny={}",
            s.x_min, s.x_max, s.y_min, s.y_max, s.nx, s.ny
        )?;
        writeln!(
            w,
            "# {LAYOUT}; x_i = x_min + i*(x_max-x_min)/nx, y_j = y_min + j*(y_max-y_min)/ny; empty = missing"
        )?;
        let mut line = String::new();
        for row in self.values.chunks(s.nx) {
            line.clear();
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    line.push(',');
                }
                if v.is_finite() {
                    line.push_str(&v.to_string());
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, SnapshotError> {
        let mut field = None;
        let mut spec = None;
        let mut values = Vec::new();
        let mut rows = 0usize;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if let Some(comment) = line.strip_prefix('#') {
                for token in comment.split_whitespace() {
                    if let Some(name) = token.strip_prefix("field=") {
                        field = Field::parse(name);
                    }
                }
                if comment.contains("nx=") {
                    spec = Some(parse_spec_line(comment)?);
                }
                continue;
            }
            let spec = spec.ok_or_else(|| SnapshotError::Format("data before spec header".into()))?;
            let before = values.len();
            for tok in line.split(',') {
                let tok = tok.trim();
                if tok.is_empty() {
                    values.push(f64::NAN);
                } else {
                    values.push(tok.parse::<f64>().map_err(|e| {
                        SnapshotError::Format(format!("line {}: {e}", lineno + 1))
                    })?);
                }
            }
            if values.len() - before != spec.nx {
                return Err(SnapshotError::Format(format!(
                    "line {}: expected {} columns, got {}",
                    lineno + 1,
                    spec.nx,
                    values.len() - before
                )));
            }
            rows += 1;
        }
        let spec = spec.ok_or_else(|| SnapshotError::Format("missing spec header".into()))?;
        let field = field.ok_or_else(|| SnapshotError::Format("missing field header".into()))?;
        if rows != spec.ny {
            return Err(SnapshotError::Format(format!("expected {} rows, got {rows}", spec.ny)));
        }
        Ok(Self { spec, field, values })
    }

    /// Writes `<path>` (raw `f64` LE) and `<path>.json`; returns the sidecar path.
    pub fn write_binary(&self, path: &Path) -> Result<PathBuf, SnapshotError> {
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            let v = if v.is_finite() { *v } else { f64::NAN };
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, bytes)?;
        let sidecar = sidecar_path(path);
        let meta = Sidecar {
            field: self.field,
            layout: LAYOUT.into(),
            dtype: "f64le".into(),
            spec: self.spec,
        };
        let json = serde_json::to_string_pretty(&meta).map_err(|e| SnapshotError::Format(e.to_string()))?;
        fs::write(&sidecar, json + "\n")?;
        Ok(sidecar)
    }

    pub fn read_binary(path: &Path) -> Result<Self, SnapshotError> {
        let meta: Sidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)
            .map_err(|e| SnapshotError::Format(format!("sidecar: {e}")))?;
        meta.spec.validate()?;
        let bytes = fs::read(path)?;
        if bytes.len() != meta.spec.len() * 8 {
            return Err(SnapshotError::Format(format!(
                "expected {} bytes, got {}",
                meta.spec.len() * 8,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self {
            spec: meta.spec,
            field: meta.field,
            values,
        })
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn parse_spec_line(line: &str) -> Result<GridSpec, SnapshotError> {
    let mut vals = [None::<&str>; 6];
    const KEYS: [&str; 6] = ["x_min", "x_max", "y_min", "y_max", "nx", "ny"];
    for token in line.split_whitespace() {
        if let Some((k, v)) = token.split_once('=') {
            if let Some(pos) = KEYS.iter().position(|key| *key == k) {
                vals[pos] = Some(v);
            }
        }
    }
    let get = |k: usize| vals[k].ok_or_else(|| SnapshotError::Format(format!("missing {}", KEYS[k])));
    let f = |k: usize| -> Result<f64, SnapshotError> {
        get(k)?
            .parse()
            .map_err(|e| SnapshotError::Format(format!("{}: {e}", KEYS[k])))
    };
    let u = |k: usize| -> Result<usize, SnapshotError> {
        get(k)?
            .parse()
            .map_err(|e| SnapshotError::Format(format!("{}: {e}", KEYS[k])))
    };
    Ok(GridSpec::new(f(0)?, f(1)?, f(2)?, f(3)?, u(4)?, u(5)?)?)
}

/// Copies one field of the grid into a dense snapshot.
pub fn snapshot(grid: &HeightGrid, field: Field) -> Snapshot {
    let values = match field {
        Field::Height => grid.cells().iter().map(|c| c.z_hat).collect(),
        Field::Covariance => grid.cells().iter().map(|c| c.p_hat).collect(),
        Field::Error => vec![f64::NAN; grid.spec().len()],
    };
    Snapshot {
        spec: *grid.spec(),
        field,
        values,
    }
}

/// Rebuilds a grid from matching height and covariance snapshots.
pub fn grid_from_snapshots(height: &Snapshot, covariance: &Snapshot) -> Result<HeightGrid, SnapshotError> {
    if height.spec != covariance.spec {
        return Err(SnapshotError::Format("height and covariance specs differ".into()));
    }
    if height.field != Field::Height || covariance.field != Field::Covariance {
        return Err(SnapshotError::Format("expected a height and a covariance snapshot".into()));
    }
    let cells = height
        .values
        .iter()
        .zip(&covariance.values)
        .map(|(&z_hat, &p_hat)| CellState { z_hat, p_hat })
        .collect();
    Ok(HeightGrid::from_cells(height.spec, cells)?)
}
