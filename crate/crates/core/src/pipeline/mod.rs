//! Eye-state classification, blink segmentation, blink statistics and the
//! forensic verdict.
//!
//! Classifiers sit behind [`EyeStateClassifier`] and are looked up by name
//! in a [`ClassifierRegistry`]; every method yields a [`StateSeries`], so
//! segmentation and the verdict are shared.

pub mod classify;
pub mod report;
pub mod segment;
pub mod stats;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::landmarks::{EyeSide, LandmarkFrame};
use crate::nn::checkpoint::ModelCheckpoint;
use crate::sequence::EyeSequence;

pub use classify::{
    classify_cnn, classify_ear, classify_lrcn, CnnClassifier, EarClassifier, EarConfig, LrcnClassifier,
};
pub use report::{analyze, render_verdict, AnalysisConfig, ForensicReport, Thresholds, Verdict};
pub use segment::{segment_blinks, Anomaly, AnomalyKind, BlinkEvent, SegmentConfig, Segmentation};
pub use stats::{blink_capture_probability, blink_statistics, BlinkStatistics};

/// Per-frame probability that one eye is closed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSeries {
    pub method: String,
    pub p_closed: Vec<f64>,
    /// Frames whose input could not be classified; their probability is 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub invalid_frames: Vec<usize>,
}

impl StateSeries {
    pub fn new(method: impl Into<String>, p_closed: Vec<f64>) -> Result<Self> {
        if let Some((i, p)) = p_closed.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidArgument(format!("p_closed[{i}] = {p} is outside [0, 1]")));
        }
        Ok(Self {
            method: method.into(),
            p_closed,
            invalid_frames: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.p_closed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_closed.is_empty()
    }

    /// Frame-wise mean of several series of equal length.
    pub fn fuse(series: &[StateSeries]) -> Result<StateSeries> {
        let first = series
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to fuse".into()))?;
        if let Some(s) = series.iter().find(|s| s.len() != first.len()) {
            return Err(Error::shape(
                "fuse",
                format!("series of length {} and {}", first.len(), s.len()),
            ));
        }
        let n = series.len() as f64;
        let p = (0..first.len())
            .map(|t| series.iter().map(|s| s.p_closed[t]).sum::<f64>() / n)
            .collect();
        let mut invalid: Vec<usize> = series.iter().flat_map(|s| s.invalid_frames.iter().copied()).collect();
        invalid.sort_unstable();
        invalid.dedup();
        Ok(StateSeries {
            method: first.method.clone(),
            p_closed: p,
            invalid_frames: invalid,
        })
    }
}

/// What a classifier may look at for one eye. Model methods read the
/// crops, the EAR method reads the landmarks.
#[derive(Clone, Copy, Debug)]
pub struct EyeInput<'a> {
    pub eye: EyeSide,
    pub crops: Option<&'a EyeSequence>,
    pub landmarks: Option<&'a [LandmarkFrame]>,
}

impl<'a> EyeInput<'a> {
    pub fn crops(seq: &'a EyeSequence) -> Self {
        Self {
            eye: seq.eye,
            crops: Some(seq),
            landmarks: None,
        }
    }

    pub fn landmarks(frames: &'a [LandmarkFrame], eye: EyeSide) -> Self {
        Self {
            eye,
            crops: None,
            landmarks: Some(frames),
        }
    }

    fn require_crops(&self, method: &str) -> Result<&'a EyeSequence> {
        self.crops
            .ok_or_else(|| Error::InvalidArgument(format!("method `{method}` needs eye crops (EBSQ input)")))
    }

    fn require_landmarks(&self, method: &str) -> Result<&'a [LandmarkFrame]> {
        self.landmarks
            .ok_or_else(|| Error::InvalidArgument(format!("method `{method}` needs landmarks (JSONL input)")))
    }
}

pub trait EyeStateClassifier: Send + Sync {
    fn name(&self) -> &str;

    fn classify(&self, input: &EyeInput<'_>) -> Result<StateSeries>;

    /// Continuous per-frame score, larger meaning "more closed", for ROC
    /// analysis. Defaults to `p_closed`.
    fn scores(&self, input: &EyeInput<'_>) -> Result<Vec<f64>> {
        Ok(self.classify(input)?.p_closed)
    }

    /// SHA-256 of the model checkpoint, if the method uses one.
    fn model_checksum(&self) -> Option<&str> {
        None
    }
}

/// Everything a factory may need to build a classifier.
#[derive(Clone, Debug, Default)]
pub struct ClassifierOptions {
    pub checkpoint: Option<ModelCheckpoint>,
    pub ear: EarConfig,
}

pub type ClassifierFactory = Box<dyn Fn(&ClassifierOptions) -> Result<Box<dyn EyeStateClassifier>> + Send + Sync>;

pub struct ClassifierRegistry {
    factories: BTreeMap<String, ClassifierFactory>,
}

impl fmt::Debug for ClassifierRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl Default for ClassifierRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("cnn", |o| {
            let ckpt = o.checkpoint.as_ref().ok_or_else(|| missing_checkpoint("cnn"))?;
            Ok(Box::new(CnnClassifier::from_checkpoint(ckpt)?))
        });
        r.register("lrcn", |o| {
            let ckpt = o.checkpoint.as_ref().ok_or_else(|| missing_checkpoint("lrcn"))?;
            Ok(Box::new(LrcnClassifier::from_checkpoint(ckpt)?))
        });
        r.register("ear", |o| Ok(Box::new(EarClassifier::new(o.ear)?)));
        r
    }
}

fn missing_checkpoint(method: &str) -> Error {
    Error::InvalidArgument(format!("method `{method}` needs a model checkpoint"))
}

impl ClassifierRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Adds or replaces the factory for `name`.
    pub fn register<F>(&mut self, name: impl Into<String>, factory: F)
    where
        F: Fn(&ClassifierOptions) -> Result<Box<dyn EyeStateClassifier>> + Send + Sync + 'static,
    {
        self.factories.insert(name.into(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn build(&self, name: &str, options: &ClassifierOptions) -> Result<Box<dyn EyeStateClassifier>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.names().collect();
            Error::InvalidArgument(format!("unknown method `{name}` (known: {})", known.join(", ")))
        })?;
        factory(options)
    }
}
