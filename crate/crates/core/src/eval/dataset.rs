use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::landmarks::{load_landmarks, EyeSide, LandmarkFrame};
use crate::sequence::{EbsqFile, EyeSequence};
use crate::tensor::Tensor;

/// Eye crops with open/closed labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledFrameSet {
    pub frames: Vec<Tensor>,
    pub labels: Vec<u8>,
    pub tags: Vec<String>,
}

impl LabeledFrameSet {
    pub fn push(&mut self, frame: Tensor, label: u8, tag: impl Into<String>) -> Result<()> {
        if label > 1 {
            return Err(Error::LabelOutOfRange {
                label: label as usize,
                classes: 2,
            });
        }
        if let Some(first) = self.frames.first() {
            if first.shape() != frame.shape() {
                return Err(Error::shape(
                    "frame set",
                    format!("frame shape {:?} differs from {:?}", frame.shape(), first.shape()),
                ));
            }
        }
        self.frames.push(frame);
        self.labels.push(label);
        self.tags.push(tag.into());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&0) && self.labels.contains(&1)
    }

    /// Stored as a labelled EBSQ sequence whose frame order is arbitrary.
    pub fn to_sequence(&self) -> Result<EyeSequence> {
        EyeSequence::new(self.frames.clone(), 1.0, EyeSide::Left)?.with_labels(self.labels.clone())
    }

    pub fn from_sequence(seq: EyeSequence, tag: &str) -> Result<Self> {
        let labels = seq
            .labels
            .ok_or_else(|| Error::InvalidArgument("frame set file carries no labels".into()))?;
        let tags = vec![tag.to_string(); labels.len()];
        Ok(Self {
            frames: seq.frames,
            labels,
            tags,
        })
    }
}

/// Fully labelled sequences, each with a blink.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledSequenceSet {
    pub items: Vec<EyeSequence>,
}

impl LabeledSequenceSet {
    pub fn new(items: Vec<EyeSequence>) -> Result<Self> {
        for (i, s) in items.iter().enumerate() {
            let labels = s
                .labels
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument(format!("sequence {i} is unlabelled")))?;
            if !labels.windows(2).any(|w| w[0] != w[1]) {
                return Err(Error::InvalidArgument(format!("sequence {i} contains no blink")));
            }
        }
        Ok(Self { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSetEntry {
    pub split: Split,
    pub path: PathBuf,
    pub count: usize,
}

/// One synthetic video: labelled left-eye crops plus landmarks of both
/// eyes, made of back-to-back episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoEntry {
    pub id: String,
    pub split: Split,
    pub crops: PathBuf,
    pub landmarks: PathBuf,
    pub fps: f64,
    pub eye: EyeSide,
    pub frames: usize,
    /// Half-open frame ranges `[start, end)` of the episodes.
    pub episodes: Vec<[usize; 2]>,
    /// Frames rendered ambiguous.
    pub ambiguous_frames: Vec<usize>,
}

/// A rendered face clip for compositing and end-to-end analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipEntry {
    pub name: String,
    pub fps: f64,
    pub frames: usize,
    /// Directory of `NNNNNN.pgm` images.
    pub images: PathBuf,
    pub landmarks: PathBuf,
    pub left_crops: PathBuf,
    pub right_crops: PathBuf,
    /// Blinks rendered into the clip.
    pub blinks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub frame_sets: Vec<FrameSetEntry>,
    pub videos: Vec<VideoEntry>,
    #[serde(default)]
    pub clips: Vec<ClipEntry>,
    /// Every file written, relative to the manifest.
    pub files: Vec<PathBuf>,
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            what: "manifest",
            offset: 0,
            detail: format!("{}: {e}", path.display()),
        })
    }

    pub fn videos(&self, split: Split) -> impl Iterator<Item = &VideoEntry> {
        self.videos.iter().filter(move |v| v.split == split)
    }

    pub fn frame_set(&self, split: Split) -> Option<&FrameSetEntry> {
        self.frame_sets.iter().find(|f| f.split == split)
    }
}

/// Loads a video's crops and cuts them into labelled episodes.
pub fn load_episodes(root: &Path, video: &VideoEntry) -> Result<Vec<EyeSequence>> {
    let seq = EbsqFile::load(root.join(&video.crops))?.into_sequence(video.fps, Some(video.eye))?;
    let labels = seq
        .labels
        .clone()
        .ok_or_else(|| Error::InvalidArgument(format!("video {} has no labels", video.id)))?;
    video
        .episodes
        .iter()
        .map(|&[s, e]| {
            if s >= e || e > seq.len() {
                return Err(Error::InvalidArgument(format!(
                    "video {}: bad episode [{s}, {e})",
                    video.id
                )));
            }
            EyeSequence::new(seq.frames[s..e].to_vec(), seq.fps, seq.eye)?.with_labels(labels[s..e].to_vec())
        })
        .collect()
}

/// Landmarks of a video cut into the same episodes as [`load_episodes`].
pub fn load_episode_landmarks(root: &Path, video: &VideoEntry) -> Result<Vec<Vec<LandmarkFrame>>> {
    let frames = load_landmarks(root.join(&video.landmarks))?;
    video
        .episodes
        .iter()
        .map(|&[s, e]| {
            frames.get(s..e).map(<[LandmarkFrame]>::to_vec).ok_or_else(|| {
                Error::InvalidArgument(format!("video {}: episode [{s}, {e}) beyond landmarks", video.id))
            })
        })
        .collect()
}
