//! Run configuration: one TOML file, every field optional.
//!
//! Missing tables and keys fall back to the defaults below, which describe a
//! desk-scale run: a 400 × 100 mm raster over a 500 × 200 mm sinusoidal part
//! mapped on a 2 mm grid. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use surfmap_core::{
    CovarianceParams, EvaluationConfig, GridSpec, HeightGrid, KfParams, MapperConfig, MaskKind, MaskSpec,
};
use surfmap_sim::{NoiseModel, Rect, SensorRig, SurfaceModel, TrajectoryPlan};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    /// Initial height of every cell (mm).
    pub z0: f64,
    /// Initial variance of every cell (mm²).
    pub p0: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 500.0,
            y_min: 0.0,
            y_max: 200.0,
            nx: 250,
            ny: 100,
            z0: 0.0,
            p0: 1e6,
        }
    }
}

impl GridConfig {
    /// 2 mm grid over the default raster area.
    pub fn raster_area() -> Self {
        Self {
            x_min: 50.0,
            x_max: 450.0,
            y_min: 50.0,
            y_max: 150.0,
            nx: 200,
            ny: 50,
            ..Self::default()
        }
    }

    pub fn spec(&self) -> Result<GridSpec, CliError> {
        GridSpec::new(self.x_min, self.x_max, self.y_min, self.y_max, self.nx, self.ny)
            .map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    pub fn build(&self) -> Result<HeightGrid, CliError> {
        HeightGrid::new(self.spec()?, self.z0, self.p0).map_err(|e| CliError::Config(format!("grid: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriggerConfig {
    /// Minimum centroid travel between map updates (mm).
    pub min_travel: f64,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self { min_travel: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Masks mapped by `map --compare` and reported by `evaluate`.
    pub masks: Vec<MaskKind>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            masks: MaskKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Timed updates per worker count.
    pub updates: usize,
    /// Worker counts to time; 0 stands for the available parallelism.
    pub workers: Vec<usize>,
    pub grid: GridConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            updates: 1000,
            workers: vec![1, 0],
            grid: GridConfig::raster_area(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker threads for the masked update; 0 uses the available
    /// parallelism.
    pub workers: usize,
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub mask: MaskSpec,
    pub covariance: CovarianceParams,
    pub kf: KfParams,
    pub trigger: TriggerConfig,
    pub surface: SurfaceModel,
    pub rig: SensorRig,
    pub trajectory: TrajectoryPlan,
    /// Rectangle covered by the raster trajectory.
    pub scan_area: Rect,
    pub noise: NoiseModel,
    pub evaluation: EvaluationConfig,
    pub compare: CompareConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            workers: 0,
            output_dir: PathBuf::from("out"),
            grid: GridConfig::default(),
            mask: MaskSpec::default(),
            covariance: CovarianceParams::default(),
            kf: KfParams::default(),
            trigger: TriggerConfig::default(),
            surface: SurfaceModel::default(),
            rig: SensorRig::default(),
            trajectory: TrajectoryPlan::default(),
            scan_area: Rect::new(50.0, 450.0, 50.0, 150.0),
            noise: NoiseModel::default(),
            evaluation: EvaluationConfig::default(),
            compare: CompareConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

pub fn available_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// SHA-256 of the resolved TOML, hex encoded. The output directory and
    /// worker count do not affect results and are left out.
    pub fn hash(&self) -> String {
        let canonical = Self {
            workers: 0,
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        Sha256::digest(canonical.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn effective_workers(&self) -> usize {
        if self.workers == 0 {
            available_workers()
        } else {
            self.workers
        }
    }

    pub fn mapper_config(&self, mask: MaskKind) -> MapperConfig {
        MapperConfig {
            mask: MaskSpec { kind: mask, ..self.mask },
            covariance: self.covariance,
            kf: self.kf,
            min_travel: self.trigger.min_travel,
            workers: self.effective_workers(),
        }
    }

    /// Checks every section and their mutual consistency; the message names
    /// the offending table.
    pub fn validate(&self) -> Result<(), CliError> {
        let section = |name: &str, r: Result<(), String>| r.map_err(|e| CliError::Config(format!("[{name}] {e}")));
        let grid = self.grid.spec()?;
        section("grid", HeightGrid::new(grid, self.grid.z0, self.grid.p0).map(|_| ()).map_err(|e| e.to_string()))?;
        section("mask", self.mask.validate().map_err(|e| e.to_string()))?;
        section("covariance", self.covariance.validate().map_err(|e| e.to_string()))?;
        section("kf", self.kf.validate().map_err(|e| e.to_string()))?;
        if !(self.trigger.min_travel > 0.0) {
            return Err(CliError::Config(format!(
                "[trigger] min_travel must be positive, got {}",
                self.trigger.min_travel
            )));
        }
        section("surface", self.surface.validate().map_err(|e| e.to_string()))?;
        section("rig", self.rig.validate().map_err(|e| e.to_string()))?;
        section("trajectory", self.trajectory.validate().map_err(|e| e.to_string()))?;
        section("noise", self.noise.validate().map_err(|e| e.to_string()))?;
        if self.noise.bias_amplitude > self.rig.max_linearization_error {
            return Err(CliError::Config(format!(
                "[noise] bias_amplitude {} exceeds the rig's linearization error bound {}",
                self.noise.bias_amplitude, self.rig.max_linearization_error
            )));
        }
        section("evaluation", self.evaluation.validate().map_err(|e| e.to_string()))?;
        if self.compare.masks.is_empty() {
            return Err(CliError::Config("[compare] masks must not be empty".into()));
        }
        self.bench.grid.spec().map_err(|e| CliError::Config(format!("[bench] {e}")))?;
        if self.bench.updates == 0 || self.bench.workers.is_empty() {
            return Err(CliError::Config("[bench] updates and workers must be nonempty".into()));
        }

        let a = &self.scan_area;
        if !(a.x_max >= a.x_min) || !(a.y_max >= a.y_min) {
            return Err(CliError::Config("[scan_area] is empty".into()));
        }
        if !self.surface.domain.contains_rect(a) {
            return Err(CliError::Config("[scan_area] lies outside the surface domain".into()));
        }
        let d = &self.surface.domain;
        if grid.x_max <= d.x_min || grid.x_min >= d.x_max || grid.y_max <= d.y_min || grid.y_min >= d.y_max {
            return Err(CliError::Config("[grid] does not overlap the surface domain".into()));
        }
        Ok(())
    }
}
