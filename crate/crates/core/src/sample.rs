//! Measurement samples and their JSON-lines wire format.
//!
//! One object per line, lengths in mm and time in seconds:
//!
//! ```json
//! {"timestamp":0.01,"pose":{"position":[x,y,z],"quaternion":[w,x,y,z]},"points":[[x,y,z],[x,y,z],[x,y,z]]}
//! ```
//!
//! `pose` is the end-effector pose the points were reconstructed with;
//! `points` are in the inertial frame. Floats are written in shortest
//! round-trip form, so a stream read back reproduces the in-memory samples
//! exactly.

use std::io::{self, BufRead, Write};

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn identity_at(position: Vec3) -> Self {
        Self {
            position,
            orientation: UnitQuaternion::identity(),
        }
    }

    /// Maps a point from the end-effector frame to the inertial frame.
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.orientation * p + self.position
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.orientation * v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSample {
    pub timestamp: f64,
    pub pose: Pose,
    pub points: Vec<Vec3>,
}

impl MeasurementSample {
    pub fn centroid(&self) -> Vec3 {
        self.points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / self.points.len() as f64
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRecord {
    position: [f64; 3],
    quaternion: [f64; 4],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    timestamp: f64,
    pose: PoseRecord,
    points: Vec<[f64; 3]>,
}

impl From<&MeasurementSample> for SampleRecord {
    fn from(s: &MeasurementSample) -> Self {
        let q = s.pose.orientation.quaternion();
        SampleRecord {
            timestamp: s.timestamp,
            pose: PoseRecord {
                position: s.pose.position.into(),
                quaternion: [q.w, q.i, q.j, q.k],
            },
            points: s.points.iter().map(|p| (*p).into()).collect(),
        }
    }
}

pub fn to_json_line(sample: &MeasurementSample) -> String {
    serde_json::to_string(&SampleRecord::from(sample)).expect("sample records always serialize")
}

/// Parses one stream line; `line` is 1-based and only used for diagnostics.
pub fn parse_line(text: &str, line: usize) -> Result<MeasurementSample, SampleError> {
    let schema = |message: String| SampleError::Schema { line, message };
    let rec: SampleRecord = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
    if !rec.timestamp.is_finite() {
        return Err(schema("timestamp must be finite".into()));
    }
    if rec.points.len() < 3 {
        return Err(schema(format!("need at least 3 points, got {}", rec.points.len())));
    }
    let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
    if !finite(&rec.pose.position) || !finite(&rec.pose.quaternion) || !rec.points.iter().all(|p| finite(p)) {
        return Err(schema("non-finite coordinate".into()));
    }
    let [w, x, y, z] = rec.pose.quaternion;
    let q = Quaternion::new(w, x, y, z);
    if !(q.norm() > 1e-12) {
        return Err(schema("zero quaternion".into()));
    }
    // already-unit quaternions are kept bit-exact
    let orientation = if (q.norm_squared() - 1.0).abs() < 1e-12 {
        UnitQuaternion::new_unchecked(q)
    } else {
        UnitQuaternion::from_quaternion(q)
    };
    Ok(MeasurementSample {
        timestamp: rec.timestamp,
        pose: Pose {
            position: rec.pose.position.into(),
            orientation,
        },
        points: rec.points.into_iter().map(Vec3::from).collect(),
    })
}

pub fn write_jsonl<'a, W: Write>(mut w: W, samples: impl IntoIterator<Item = &'a MeasurementSample>) -> io::Result<()> {
    for s in samples {
        writeln!(w, "{}", to_json_line(s))?;
    }
    Ok(())
}

/// Streams samples from JSON lines, yielding `(line_number, sample)`.
/// Blank lines are skipped.
pub struct SampleReader<R> {
    inner: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> SampleReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            line: 0,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for SampleReader<R> {
    type Item = Result<(usize, MeasurementSample), SampleError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {
                    self.line += 1;
                    let text = self.buf.trim();
                    if text.is_empty() {
                        continue;
                    }
                    return Some(parse_line(text, self.line).map(|s| (self.line, s)));
                }
                Err(e) => return Some(Err(e.into())),
            }
        }
    }
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<MeasurementSample>, SampleError> {
    SampleReader::new(r).map(|res| res.map(|(_, s)| s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn sample() -> MeasurementSample {
        MeasurementSample {
            timestamp: 0.123,
            pose: Pose {
                position: Vec3::new(1.0, 2.0, 3.0),
                orientation: UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 0.3),
            },
            points: vec![
                Vec3::new(0.1, 0.2, 0.3),
                Vec3::new(1.0 / 3.0, -2.5, 7.0),
                Vec3::new(9.0, 13.0, 1e-7),
            ],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let s = sample();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, [&s, &s]).unwrap();
        let back = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, vec![s.clone(), s]);
    }

    #[test]
    fn schema_errors_carry_line_numbers() {
        let good = to_json_line(&sample());
        let text = format!("{good}\n\n{{\"timestamp\":1}}\n");
        let results: Vec<_> = SampleReader::new(text.as_bytes()).collect();
        assert_eq!(results.len(), 2);
        assert_eq!(results[0].as_ref().unwrap().0, 1);
        match &results[1] {
            Err(SampleError::Schema { line, .. }) => assert_eq!(*line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let two_points = r#"{"timestamp":0,"pose":{"position":[0,0,0],"quaternion":[1,0,0,0]},"points":[[0,0,0],[1,0,0]]}"#;
        assert!(matches!(parse_line(two_points, 7), Err(SampleError::Schema { line: 7, .. })));
    }

    #[test]
    fn centroid() {
        let s = sample();
        let c = s.centroid();
        assert!((c.x - (0.1 + 1.0 / 3.0 + 9.0) / 3.0).abs() < 1e-15);
    }
}
