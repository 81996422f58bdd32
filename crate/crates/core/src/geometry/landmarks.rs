//! 68-point facial landmark frames and their JSON Lines stream format.
//!
//! Index convention (0-based, standard 68-point layout): jaw 0–16,
//! eyebrows 17–26, nose 27–35, left eye 36–41, right eye 42–47,
//! mouth 48–67. Within each eye the six points run p1 (outer corner),
//! p2, p3 (upper lid), p4 (inner corner), p5, p6 (lower lid).

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

pub const LANDMARK_COUNT: usize = 68;
pub const LEFT_EYE: std::ops::Range<usize> = 36..42;
pub const RIGHT_EYE: std::ops::Range<usize> = 42..48;
pub const EYEBROWS: std::ops::Range<usize> = 17..27;
/// Outer lower-lip contour between the mouth corners.
pub const LOWER_LIP: std::ops::Range<usize> = 55..60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EyeSide {
    Left,
    Right,
}

impl EyeSide {
    pub fn indices(self) -> std::ops::Range<usize> {
        match self {
            EyeSide::Left => LEFT_EYE,
            EyeSide::Right => RIGHT_EYE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EyeSide::Left => "left",
            EyeSide::Right => "right",
        }
    }
}

impl std::str::FromStr for EyeSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(EyeSide::Left),
            "right" => Ok(EyeSide::Right),
            _ => Err(Error::InvalidArgument(format!("unknown eye `{s}`"))),
        }
    }
}

/// Landmarks of one video frame, with optional per-eye ground truth
/// (0 = open, 1 = closed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkFrame {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub points: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_label: Option<u8>,
}

impl LandmarkFrame {
    pub fn validate(&self) -> Result<()> {
        if self.points.len() != LANDMARK_COUNT {
            return Err(Error::InvalidArgument(format!(
                "frame {}: expected {LANDMARK_COUNT} points, got {}",
                self.frame_index,
                self.points.len()
            )));
        }
        if self.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "frame {}: non-finite landmark",
                self.frame_index
            )));
        }
        for l in [self.left_label, self.right_label].into_iter().flatten() {
            if l > 1 {
                return Err(Error::InvalidArgument(format!(
                    "frame {}: label {l} is not 0 or 1",
                    self.frame_index
                )));
            }
        }
        Ok(())
    }

    /// The six points p1..p6 of one eye.
    pub fn eye(&self, side: EyeSide) -> [Point; 6] {
        let r = side.indices();
        std::array::from_fn(|k| self.points[r.start + k])
    }

    pub fn eye_center(&self, side: EyeSide) -> Point {
        centroid(&self.eye(side))
    }

    pub fn label(&self, side: EyeSide) -> Option<u8> {
        match side {
            EyeSide::Left => self.left_label,
            EyeSide::Right => self.right_label,
        }
    }
}

pub fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(ax, ay), p| (ax + p[0], ay + p[1]));
    [sx / n, sy / n]
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Parses a landmark stream; errors carry the byte offset of the bad line.
pub fn read_landmarks_jsonl(reader: impl BufRead) -> Result<Vec<LandmarkFrame>> {
    let mut frames = Vec::new();
    let mut offset = 0u64;
    for line in reader.split(b'\n') {
        let line = line?;
        let at = offset;
        offset += line.len() as u64 + 1;
        let text = std::str::from_utf8(&line).map_err(|_| Error::Format {
            what: "landmark stream",
            offset: at,
            detail: "line is not UTF-8".into(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let frame: LandmarkFrame = serde_json::from_str(text).map_err(|e| Error::Format {
            what: "landmark stream",
            offset: at,
            detail: e.to_string(),
        })?;
        frame.validate().map_err(|e| Error::Format {
            what: "landmark stream",
            offset: at,
            detail: e.to_string(),
        })?;
        frames.push(frame);
    }
    Ok(frames)
}

pub fn load_landmarks(path: impl AsRef<Path>) -> Result<Vec<LandmarkFrame>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_landmarks_jsonl(std::io::BufReader::new(f))
}

pub fn write_landmarks_jsonl(mut writer: impl Write, frames: &[LandmarkFrame]) -> Result<()> {
    for f in frames {
        serde_json::to_writer(&mut writer, f)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_landmarks(path: impl AsRef<Path>, frames: &[LandmarkFrame]) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_landmarks_jsonl(&mut w, frames)?;
    w.flush().map_err(|e| Error::file(path, e))
}
