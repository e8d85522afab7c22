//! Timing of the masked update on realistic planes and masks.
//!
//! Planes and masks come from the configured simulated scan (trigger
//! applied), built on the bench grid. Each worker count replays the same
//! updates on a fresh grid three ways: with the sample's own mask, with a
//! full-grid mask and with an empty mask. Final grids are compared bit for
//! bit across worker counts.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;
use surfmap_core::{
    build_local_frame, build_mask, fit_plane_pca, BinaryMask, FrameMode, HeightGrid, MapUpdater, MaskFrame, Plane,
    UpdateTrigger, Vec3,
};

use crate::config::{available_workers, RunConfig};
use crate::pipeline::simulate;
use crate::CliError;

#[derive(Debug, Clone)]
pub struct BenchCase {
    pub plane: Plane,
    pub points: Vec<Vec3>,
    pub mask: BinaryMask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskShape {
    /// The sample's own mask.
    Sample,
    Full,
    Empty,
}

impl MaskShape {
    pub fn name(self) -> &'static str {
        match self {
            MaskShape::Sample => "sample",
            MaskShape::Full => "full",
            MaskShape::Empty => "empty",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub shape: MaskShape,
    pub workers: usize,
    pub updates: usize,
    pub median_us: f64,
    pub p95_us: f64,
    pub mean_cells: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<TimingRow>,
    /// Final grids identical across worker counts for every shape.
    pub identical: bool,
    /// Single-worker over best multi-worker median on full-grid masks.
    pub full_grid_speedup: Option<f64>,
}

impl BenchReport {
    pub fn row(&self, shape: MaskShape, workers: usize) -> Option<&TimingRow> {
        self.rows.iter().find(|r| r.shape == shape && r.workers == workers)
    }
}

/// Planes and bench-grid masks of the trigger-accepted samples of the
/// configured scan, at most `limit` of them.
pub fn bench_cases(config: &RunConfig, limit: usize) -> Result<Vec<BenchCase>, CliError> {
    let scan = simulate(config)?;
    let spec = config.bench.grid.spec()?;
    let mut trigger = UpdateTrigger::new(config.trigger.min_travel).map_err(|e| CliError::Config(e.to_string()))?;
    let mut cases = Vec::new();
    for sample in &scan.samples {
        if cases.len() >= limit {
            break;
        }
        if !trigger.should_update(&sample.centroid()) {
            continue;
        }
        let Ok(plane) = fit_plane_pca(&sample.points) else { continue };
        if !plane.is_height_map() {
            continue;
        }
        let Ok(frame) = build_local_frame(&plane, &sample.points[0]) else { continue };
        let mask_frame = match config.mask.frame_mode {
            FrameMode::LocalA => MaskFrame::Local {
                plane: &plane,
                frame: &frame,
            },
            FrameMode::InertialXy => MaskFrame::InertialXy,
        };
        let Ok(built) = build_mask(&spec, &config.mask, &sample.points, mask_frame) else { continue };
        if built.warning.is_some() {
            continue;
        }
        cases.push(BenchCase {
            plane,
            points: sample.points.clone(),
            mask: built.mask,
        });
    }
    Ok(cases)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Applies `updates` cases (cycling) on a fresh bench grid and times each
/// update.
pub fn time_updates(
    config: &RunConfig,
    cases: &[BenchCase],
    updates: usize,
    workers: usize,
    shape: MaskShape,
) -> Result<(TimingRow, HeightGrid), CliError> {
    let mut grid = config.bench.grid.build()?;
    let spec = *grid.spec();
    let updater = MapUpdater::new(config.covariance, config.kf, workers).map_err(|e| CliError::Config(e.to_string()))?;
    let (full, empty) = (BinaryMask::full(spec), BinaryMask::empty(spec));
    let mut times = Vec::with_capacity(updates);
    let mut cells = 0usize;
    for case in cases.iter().cycle().take(updates) {
        let mask = match shape {
            MaskShape::Sample => &case.mask,
            MaskShape::Full => &full,
            MaskShape::Empty => &empty,
        };
        let start = Instant::now();
        let stats = updater
            .apply(&mut grid, &case.plane, &case.points, mask)
            .map_err(|e| CliError::Data(e.to_string()))?;
        times.push(start.elapsed().as_secs_f64() * 1e6);
        cells += stats.cells_touched;
    }
    times.sort_by(f64::total_cmp);
    let row = TimingRow {
        shape,
        workers,
        updates: times.len(),
        median_us: percentile(&times, 0.5),
        p95_us: percentile(&times, 0.95),
        mean_cells: cells as f64 / times.len().max(1) as f64,
    };
    Ok((row, grid))
}

fn same_bits(a: &HeightGrid, b: &HeightGrid) -> bool {
    a.cells().len() == b.cells().len()
        && a.cells().iter().zip(b.cells()).all(|(x, y)| {
            x.z_hat.to_bits() == y.z_hat.to_bits() && x.p_hat.to_bits() == y.p_hat.to_bits()
        })
}

pub fn run_bench(config: &RunConfig) -> Result<BenchReport, CliError> {
    config.validate()?;
    let cases = bench_cases(config, config.bench.updates)?;
    if cases.is_empty() {
        return Err(CliError::Data("the configured scan produced no usable updates".into()));
    }
    let mut workers: Vec<usize> = config
        .bench
        .workers
        .iter()
        .map(|&w| if w == 0 { available_workers() } else { w })
        .collect();
    workers.dedup();

    let mut rows = Vec::new();
    let mut identical = true;
    for shape in [MaskShape::Sample, MaskShape::Full, MaskShape::Empty] {
        let mut reference: Option<HeightGrid> = None;
        for &w in &workers {
            let (row, grid) = time_updates(config, &cases, config.bench.updates, w, shape)?;
            match &reference {
                None => reference = Some(grid),
                Some(r) => identical &= same_bits(r, &grid),
            }
            rows.push(row);
        }
    }
    let full: Vec<&TimingRow> = rows.iter().filter(|r| r.shape == MaskShape::Full).collect();
    let single = full.iter().find(|r| r.workers == 1).map(|r| r.median_us);
    let best_multi = full
        .iter()
        .filter(|r| r.workers > 1)
        .map(|r| r.median_us)
        .min_by(f64::total_cmp);
    let full_grid_speedup = single.zip(best_multi).map(|(s, m)| s / m);
    Ok(BenchReport {
        rows,
        identical,
        full_grid_speedup,
    })
}

pub const BENCH_CSV_HEADER: &str = "mask,workers,updates,median_us,p95_us,mean_cells";

pub fn write_bench_csv<W: Write>(mut w: W, report: &BenchReport) -> std::io::Result<()> {
    writeln!(w, "{BENCH_CSV_HEADER}")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{:.3},{:.3},{:.1}",
            r.shape.name(),
            r.workers,
            r.updates,
            r.median_us,
            r.p95_us,
            r.mean_cells
        )?;
    }
    Ok(())
}

pub fn write_bench_table<W: Write>(mut w: W, report: &BenchReport) -> std::io::Result<()> {
    writeln!(
        w,
        "{:<8} {:>7} {:>7} {:>12} {:>12} {:>10}",
        "mask", "workers", "updates", "median [ms]", "p95 [ms]", "cells"
    )?;
    for r in &report.rows {
        writeln!(
            w,
            "{:<8} {:>7} {:>7} {:>12.4} {:>12.4} {:>10.1}",
            r.shape.name(),
            r.workers,
            r.updates,
            r.median_us / 1e3,
            r.p95_us / 1e3,
            r.mean_cells
        )?;
    }
    match report.full_grid_speedup {
        Some(s) => writeln!(w, "full-grid speedup: {s:.2}x")?,
        None => writeln!(w, "full-grid speedup: n/a (single worker count)")?,
    }
    writeln!(
        w,
        "grids identical across worker counts: {}",
        if report.identical { "yes" } else { "NO" }
    )
}
