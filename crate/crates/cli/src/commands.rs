//! Subcommands: file layout and reporting around [`crate::pipeline`].
//!
//! Output layout under the output directory:
//!
//! ```text
//! config.resolved.toml       fully defaulted config of the last command
//! samples.jsonl              simulate: sample stream
//! manifest.json              simulate: seed, config hash, counts
//! <mask>/height.{csv,bin}    map: final grid, one directory per mask
//! <mask>/covariance.{csv,bin}
//! <mask>/update_log.csv
//! <mask>/manifest.json
//! <mask>/error.{csv,bin}     evaluate: signed error map
//! report.csv, report.txt     evaluate: one row per mask
//! bench.csv                  bench: timing per mask shape and worker count
//! ```

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use surfmap_core::evaluation::{write_report_csv, write_report_table};
use surfmap_core::pipeline::UPDATE_LOG_HEADER;
use surfmap_core::sample::write_jsonl;
use surfmap_core::{error_map, grid_from_snapshots, snapshot, Field, MaskKind, Snapshot};

use crate::config::RunConfig;
use crate::pipeline::{evaluate_grid, map_samples, numbered, read_stream, simulate, MapRun};
use crate::CliError;

pub const STREAM_FILE: &str = "samples.jsonl";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";

fn data_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| data_err(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("manifests always serialize");
    fs::write(path, text + "\n").map_err(|e| data_err(path, e))
}

/// Creates the output directory and writes the resolved config into it.
pub fn prepare_output(config: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| data_err(&dir, e))?;
    let path = dir.join(RESOLVED_CONFIG_FILE);
    fs::write(&path, config.to_toml()).map_err(|e| data_err(&path, e))?;
    Ok(dir)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub stream: String,
    pub samples: usize,
    pub gaps: usize,
}

/// Writes the sample stream to `stream` (`-` for stdout, default
/// `<out>/samples.jsonl`) and the manifest next to the resolved config.
pub fn cmd_simulate(config: &RunConfig, stream: Option<&Path>, log: &mut dyn Write) -> Result<SimulateManifest, CliError> {
    config.validate()?;
    let dir = prepare_output(config)?;
    let scan = simulate(config)?;
    let to_stdout = stream.is_some_and(|p| p.as_os_str() == "-");
    let stream_path = stream.map_or_else(|| dir.join(STREAM_FILE), Path::to_path_buf);
    if to_stdout {
        let stdout = io::stdout();
        write_jsonl(stdout.lock(), &scan.samples).map_err(|e| CliError::Data(format!("stdout: {e}")))?;
    } else {
        let mut w = create(&stream_path)?;
        write_jsonl(&mut w, &scan.samples).map_err(|e| data_err(&stream_path, e))?;
        w.flush().map_err(|e| data_err(&stream_path, e))?;
    }
    let manifest = SimulateManifest {
        command: "simulate".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: config.noise.seed,
        config_hash: config.hash(),
        stream: stream_path.display().to_string(),
        samples: scan.samples.len(),
        gaps: scan.gaps.len(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    writeln!(
        log,
        "simulated {} samples ({} gaps) -> {}",
        manifest.samples, manifest.gaps, manifest.stream
    )
    .ok();
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapManifest {
    pub command: String,
    pub version: String,
    pub mask: MaskKind,
    pub config_hash: String,
    pub input: String,
    pub samples: usize,
    pub applied_updates: usize,
    pub skipped_updates: usize,
    pub workers: usize,
}

pub fn mask_dir(out: &Path, mask: MaskKind) -> PathBuf {
    out.join(mask.name())
}

/// Writes height and covariance snapshots (CSV and binary) and the update
/// log of one run.
pub fn write_map_run(dir: &Path, run: &MapRun) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| data_err(dir, e))?;
    for field in [Field::Height, Field::Covariance] {
        write_snapshot(dir, &snapshot(&run.grid, field))?;
    }
    let path = dir.join("update_log.csv");
    let mut w = create(&path)?;
    writeln!(w, "{UPDATE_LOG_HEADER}").map_err(|e| data_err(&path, e))?;
    for rec in &run.log {
        writeln!(w, "{}", rec.csv_row()).map_err(|e| data_err(&path, e))?;
    }
    w.flush().map_err(|e| data_err(&path, e))
}

fn write_snapshot(dir: &Path, snap: &Snapshot) -> Result<(), CliError> {
    let csv = dir.join(format!("{}.csv", snap.field.name()));
    let mut w = create(&csv)?;
    snap.write_csv(&mut w).map_err(|e| data_err(&csv, e))?;
    w.flush().map_err(|e| data_err(&csv, e))?;
    let bin = dir.join(format!("{}.bin", snap.field.name()));
    snap.write_binary(&bin).map_err(|e| data_err(&bin, e))?;
    Ok(())
}

/// Reads the final grid of one map run back from its directory.
pub fn read_map_run(dir: &Path) -> Result<surfmap_core::HeightGrid, CliError> {
    let read = |field: Field| {
        let path = dir.join(format!("{}.bin", field.name()));
        Snapshot::read_binary(&path).map_err(|e| data_err(&path, e))
    };
    let (h, c) = (read(Field::Height)?, read(Field::Covariance)?);
    grid_from_snapshots(&h, &c).map_err(|e| data_err(dir, e))
}

/// Maps a stream (`-` for stdin) or, without input, a freshly simulated
/// scan. With `compare`, every mask of `[compare]` is mapped; otherwise only
/// `mask.kind`.
pub fn cmd_map(
    config: &RunConfig,
    input: Option<&Path>,
    compare: bool,
    log: &mut dyn Write,
) -> Result<Vec<MapManifest>, CliError> {
    config.validate()?;
    let dir = prepare_output(config)?;
    let masks = if compare { config.compare.masks.clone() } else { vec![config.mask.kind] };

    let (input_name, runs) = match input {
        None => {
            let scan = simulate(config)?;
            let runs = masks
                .iter()
                .map(|&m| map_samples(config, m, numbered(&scan.samples)))
                .collect::<Result<Vec<_>, _>>()?;
            ("simulation".to_string(), runs)
        }
        Some(p) if p.as_os_str() == "-" => {
            // stdin can only be read once
            let all: Vec<_> = read_stream(io::stdin().lock()).collect::<Result<_, _>>()?;
            let runs = masks
                .iter()
                .map(|&m| map_samples(config, m, all.iter().cloned().map(Ok)))
                .collect::<Result<Vec<_>, _>>()?;
            ("stdin".to_string(), runs)
        }
        Some(path) => {
            let runs = masks
                .iter()
                .map(|&m| {
                    let file = File::open(path).map_err(|e| data_err(path, e))?;
                    map_samples(config, m, read_stream(BufReader::new(file)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            (path.display().to_string(), runs)
        }
    };

    let mut manifests = Vec::with_capacity(runs.len());
    for run in &runs {
        let mdir = mask_dir(&dir, run.mask);
        write_map_run(&mdir, run)?;
        let manifest = MapManifest {
            command: "map".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            mask: run.mask,
            config_hash: config.hash(),
            input: input_name.clone(),
            samples: run.samples_read,
            applied_updates: run.applied(),
            skipped_updates: run.skipped(),
            workers: config.effective_workers(),
        };
        write_json(&mdir.join("manifest.json"), &manifest)?;
        writeln!(
            log,
            "{}: {} samples, {} updates applied, {} skipped -> {}",
            run.mask.name(),
            run.samples_read,
            manifest.applied_updates,
            manifest.skipped_updates,
            mdir.display()
        )
        .ok();
        manifests.push(manifest);
    }
    Ok(manifests)
}

/// Evaluates every mask directory found under `grids` (default: the output
/// directory) against the configured surface. Writes per-mask error maps and
/// the comparison table.
pub fn cmd_evaluate(
    config: &RunConfig,
    grids: Option<&Path>,
    log: &mut dyn Write,
) -> Result<Vec<surfmap_core::EvaluationReport>, CliError> {
    config.validate()?;
    let dir = prepare_output(config)?;
    let root = grids.map_or_else(|| dir.clone(), Path::to_path_buf);
    let found: Vec<MaskKind> = config
        .compare
        .masks
        .iter()
        .chain(std::iter::once(&config.mask.kind))
        .copied()
        .fold(Vec::new(), |mut acc, m| {
            if !acc.contains(&m) && mask_dir(&root, m).join("height.bin").exists() {
                acc.push(m);
            }
            acc
        });
    if found.is_empty() {
        return Err(CliError::Data(format!("no mapped grids found under {}", root.display())));
    }

    let mut reports = Vec::with_capacity(found.len());
    for mask in found {
        let grid = read_map_run(&mask_dir(&root, mask))?;
        let report = evaluate_grid(config, &grid, mask)?;
        let mdir = mask_dir(&dir, mask);
        fs::create_dir_all(&mdir).map_err(|e| data_err(&mdir, e))?;
        write_snapshot(&mdir, &error_map(&grid, &config.surface, config.evaluation.cov_threshold))?;
        reports.push(report);
    }

    let csv = dir.join("report.csv");
    let mut w = create(&csv)?;
    write_report_csv(&mut w, &reports).map_err(|e| data_err(&csv, e))?;
    w.flush().map_err(|e| data_err(&csv, e))?;
    let mut table = Vec::new();
    write_report_table(&mut table, &reports).expect("writing to memory");
    writeln!(
        table,
        "errors: mapped minus true height on a {} mm lattice, cells with variance <= {}; std is the population standard deviation",
        config.evaluation.spacing, config.evaluation.cov_threshold
    )
    .expect("writing to memory");
    let txt = dir.join("report.txt");
    fs::write(&txt, &table).map_err(|e| data_err(&txt, e))?;
    log.write_all(&table).ok();
    Ok(reports)
}
