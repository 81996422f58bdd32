//! Eye-crop sequences and the `EBSQ` file format.
//!
//! ```text
//! "EBSQ" | u32 version | u32 frames | u32 height | u32 width | u32 channels
//! frames × height × width × channels f32 pixels (frame-major, row-major)
//! optional: frames × 2 label bytes (left, right); 0 open, 1 closed, 255 none
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::landmarks::EyeSide;
use crate::nn::checkpoint::Reader;
use crate::tensor::Tensor;

pub const EBSQ_MAGIC: &[u8; 4] = b"EBSQ";
pub const EBSQ_VERSION: u32 = 1;
pub const UNLABELED: u8 = 255;

/// Temporally ordered crops of one eye.
#[derive(Clone, Debug, PartialEq)]
pub struct EyeSequence {
    /// `[H, W, C]` frames sharing one shape.
    pub frames: Vec<Tensor>,
    pub fps: f64,
    pub eye: EyeSide,
    /// Per-frame state, 0 open / 1 closed.
    pub labels: Option<Vec<u8>>,
    /// Frames whose crop box reached outside the source image.
    pub padded_frames: Vec<usize>,
}

impl EyeSequence {
    pub fn new(frames: Vec<Tensor>, fps: f64, eye: EyeSide) -> Result<Self> {
        if !(fps > 0.0) || !fps.is_finite() {
            return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
        }
        if let Some(first) = frames.first() {
            if first.rank() != 3 {
                return Err(Error::shape(
                    "eye sequence",
                    format!("frames must be [H, W, C], got {:?}", first.shape()),
                ));
            }
            if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.shape() != first.shape()) {
                return Err(Error::shape(
                    "eye sequence",
                    format!("frame {i} has shape {:?}, frame 0 {:?}", f.shape(), first.shape()),
                ));
            }
        }
        Ok(Self {
            frames,
            fps,
            eye,
            labels: None,
            padded_frames: Vec::new(),
        })
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.frames.len() {
            return Err(Error::shape(
                "eye sequence labels",
                format!("{} labels for {} frames", labels.len(), self.frames.len()),
            ));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidArgument(format!("label {bad} is not 0 or 1")));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_shape(&self) -> Option<&[usize]> {
        self.frames.first().map(Tensor::shape)
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    pub fn to_ebsq(&self) -> Result<Vec<u8>> {
        let shape = self
            .frame_shape()
            .ok_or_else(|| Error::InvalidArgument("cannot write an empty sequence".into()))?;
        let mut out = Vec::with_capacity(24 + self.frames.len() * self.frames[0].len() * 4);
        out.extend_from_slice(EBSQ_MAGIC);
        for v in [
            EBSQ_VERSION,
            self.frames.len() as u32,
            shape[0] as u32,
            shape[1] as u32,
            shape[2] as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for f in &self.frames {
            for &v in f.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        if let Some(labels) = &self.labels {
            for &l in labels {
                let pair = match self.eye {
                    EyeSide::Left => [l, UNLABELED],
                    EyeSide::Right => [UNLABELED, l],
                };
                out.extend_from_slice(&pair);
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_ebsq()?).map_err(|e| Error::file(path, e))
    }
}

/// Raw contents of an `EBSQ` file.
#[derive(Clone, Debug, PartialEq)]
pub struct EbsqFile {
    pub frames: Vec<Tensor>,
    /// Per frame `[left, right]`; `None` where unlabeled.
    pub labels: Option<Vec<[Option<u8>; 2]>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl EbsqFile {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "EBSQ sequence");
        if r.take(4)? != EBSQ_MAGIC {
            return Err(r.error(0, "bad magic, expected EBSQ"));
        }
        let version = r.u32()?;
        if version != EBSQ_VERSION {
            return Err(r.error(4, format!("unsupported version {version}")));
        }
        let n = r.u32()? as usize;
        let (h, w, c) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        if h == 0 || w == 0 || c == 0 {
            return Err(r.error(12, format!("zero frame dimension {h}x{w}x{c}")));
        }
        let per_frame = h * w * c;
        let mut frames = Vec::with_capacity(n);
        for _ in 0..n {
            let raw = r.take(per_frame * 4)?;
            let data: Vec<f64> = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect();
            frames.push(Tensor::new(vec![h, w, c], data)?);
        }
        let labels = match r.remaining() {
            0 => None,
            rem if rem == 2 * n => {
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    let at = r.pos;
                    let mut pair = [None, None];
                    for slot in &mut pair {
                        *slot = match r.u8()? {
                            0 => Some(0),
                            1 => Some(1),
                            UNLABELED => None,
                            other => return Err(r.error(at, format!("invalid label byte {other}"))),
                        };
                    }
                    out.push(pair);
                }
                Some(out)
            }
            rem => {
                return Err(r.error(
                    r.pos,
                    format!("{rem} trailing bytes; label block must be {} bytes", 2 * n),
                ))
            }
        };
        Ok(Self { frames, labels })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&bytes)
    }

    /// The eye whose label column is populated (left when ambiguous).
    pub fn labelled_eye(&self) -> EyeSide {
        match &self.labels {
            Some(l) if l.iter().all(|p| p[0].is_none()) && l.iter().any(|p| p[1].is_some()) => EyeSide::Right,
            _ => EyeSide::Left,
        }
    }

    /// Builds a sequence for `eye`; labels are attached only when every
    /// frame carries one for that eye.
    pub fn into_sequence(self, fps: f64, eye: Option<EyeSide>) -> Result<EyeSequence> {
        let eye = eye.unwrap_or_else(|| self.labelled_eye());
        let col = match eye {
            EyeSide::Left => 0,
            EyeSide::Right => 1,
        };
        let labels: Option<Vec<u8>> = self.labels.as_ref().and_then(|l| l.iter().map(|p| p[col]).collect());
        let seq = EyeSequence::new(self.frames, fps, eye)?;
        match labels {
            Some(l) => seq.with_labels(l),
            None => Ok(seq),
        }
    }
}
