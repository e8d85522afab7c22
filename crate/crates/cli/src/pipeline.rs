//! In-memory versions of the subcommands, shared by the CLI and the tests.

use std::io::BufRead;

use surfmap_core::{
    evaluate, EvalError, EvaluationReport, HeightGrid, Mapper, MaskKind, MeasurementSample, SampleReader,
    UpdateRecord,
};
use surfmap_sim::{simulate_scan, ScanOutput};

use crate::config::RunConfig;
use crate::CliError;

/// Simulates the configured raster scan.
pub fn simulate(config: &RunConfig) -> Result<ScanOutput, CliError> {
    config.validate()?;
    simulate_scan(&config.surface, &config.rig, &config.trajectory, &config.scan_area, &config.noise)
        .map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct MapRun {
    pub mask: MaskKind,
    pub grid: HeightGrid,
    /// Trigger-accepted samples, applied or skipped.
    pub log: Vec<UpdateRecord>,
    pub samples_read: usize,
}

impl MapRun {
    pub fn applied(&self) -> usize {
        self.log.iter().filter(|r| r.is_applied()).count()
    }

    pub fn skipped(&self) -> usize {
        self.log.len() - self.applied()
    }
}

/// Maps `(stream_position, sample)` pairs in order with the given mask.
pub fn map_samples<I>(config: &RunConfig, mask: MaskKind, samples: I) -> Result<MapRun, CliError>
where
    I: IntoIterator<Item = Result<(usize, MeasurementSample), CliError>>,
{
    let mut mapper =
        Mapper::new(config.grid.build()?, &config.mapper_config(mask)).map_err(|e| CliError::Config(e.to_string()))?;
    let mut samples_read = 0;
    for item in samples {
        let (position, sample) = item?;
        mapper.process(position, &sample);
        samples_read += 1;
    }
    let log = mapper.log().to_vec();
    Ok(MapRun {
        mask,
        grid: mapper.into_grid(),
        log,
        samples_read,
    })
}

/// Numbers in-memory samples the way a stream reader numbers lines.
pub fn numbered(samples: &[MeasurementSample]) -> impl Iterator<Item = Result<(usize, MeasurementSample), CliError>> + '_ {
    samples.iter().enumerate().map(|(k, s)| Ok((k + 1, s.clone())))
}

/// Reads a JSON-lines stream; schema violations are data errors.
pub fn read_stream<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, MeasurementSample), CliError>> {
    SampleReader::new(reader).map(|r| r.map_err(|e| CliError::Data(e.to_string())))
}

pub fn evaluate_grid(config: &RunConfig, grid: &HeightGrid, mask: MaskKind) -> Result<EvaluationReport, CliError> {
    match evaluate(grid, &config.surface, &config.evaluation) {
        Ok(report) => Ok(report.with_mask(mask)),
        Err(e @ EvalError::NoCountedCells { .. }) => Err(CliError::EvaluationEmpty(format!("{}: {e}", mask.name()))),
        Err(e) => Err(CliError::Config(e.to_string())),
    }
}
