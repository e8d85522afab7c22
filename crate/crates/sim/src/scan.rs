//! Turns a pose sequence into a measurement-sample stream.

use std::f64::consts::TAU;

use log::warn;
use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use surfmap_core::{MeasurementSample, Pose, Vec3};

use crate::noise::NoiseModel;
use crate::rig::SensorRig;
use crate::surface::{Rect, SurfaceModel};
use crate::trajectory::{plan_raster, PlannedPose, TrajectoryPlan};
use crate::SimError;

/// A pose for which at least one beam missed the surface.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGap {
    pub pose_index: usize,
    pub timestamp: f64,
    pub error: SimError,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanOutput {
    pub samples: Vec<MeasurementSample>,
    /// Sensor readings behind each sample.
    pub readings: Vec<[f64; 3]>,
    pub gaps: Vec<ScanGap>,
}

/// Plans the raster over `area` and measures along it.
pub fn simulate_scan(
    model: &SurfaceModel,
    rig: &SensorRig,
    plan: &TrajectoryPlan,
    area: &Rect,
    noise: &NoiseModel,
) -> Result<ScanOutput, SimError> {
    model.validate()?;
    let poses = plan_raster(plan, area, model)?;
    simulate_poses(model, rig, &poses, noise)
}

/// Measures from each pose in turn. The random stream is consumed in a fixed
/// pattern (three bias phases, then per pose three reading draws and six pose
/// draws), so the output depends only on the inputs and the seed.
pub fn simulate_poses(
    model: &SurfaceModel,
    rig: &SensorRig,
    poses: &[PlannedPose],
    noise: &NoiseModel,
) -> Result<ScanOutput, SimError> {
    rig.validate()?;
    noise.validate()?;
    let beams = rig.beams();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let phases: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..TAU));
    let mut out = ScanOutput::default();

    for (k, planned) in poses.iter().enumerate() {
        let draws: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let pose_draws: [f64; 6] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));

        let distances: Result<Vec<f64>, SimError> = beams
            .iter()
            .map(|beam| rig.measure(model, &planned.pose, beam))
            .collect();
        let distances = match distances {
            Ok(d) => d,
            Err(error) => {
                warn!("pose {k} at t={}: {error}; sample dropped", planned.timestamp);
                out.gaps.push(ScanGap {
                    pose_index: k,
                    timestamp: planned.timestamp,
                    error,
                });
                continue;
            }
        };

        let reference = poses[k.saturating_sub(noise.pose_delay)].pose;
        let pose = perturb(&reference, noise, &pose_draws);
        let readings: [f64; 3] = std::array::from_fn(|s| noise.reading(distances[s], phases[s], draws[s]));
        let points = beams
            .iter()
            .zip(readings)
            .map(|(beam, d)| SensorRig::point_at(&pose, beam, d))
            .collect();
        out.samples.push(MeasurementSample {
            timestamp: planned.timestamp,
            pose,
            points,
        });
        out.readings.push(readings);
    }
    Ok(out)
}

fn perturb(pose: &Pose, noise: &NoiseModel, draws: &[f64; 6]) -> Pose {
    if noise.pose_position_sigma == 0.0 && noise.pose_rotation_sigma == 0.0 {
        return *pose;
    }
    let dp = noise.pose_position_sigma * Vec3::new(draws[0], draws[1], draws[2]);
    let dr = noise.pose_rotation_sigma * Vec3::new(draws[3], draws[4], draws[5]);
    Pose {
        position: pose.position + dp,
        orientation: UnitQuaternion::from_scaled_axis(dr) * pose.orientation,
    }
}
