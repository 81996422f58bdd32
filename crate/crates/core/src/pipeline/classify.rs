use serde::{Deserialize, Serialize};

use super::{EyeInput, EyeStateClassifier, StateSeries};
use crate::error::{Error, Result};
use crate::geometry::ear::ear;
use crate::geometry::landmarks::{EyeSide, LandmarkFrame};
use crate::nn::checkpoint::ModelCheckpoint;
use crate::nn::lstm::LstmState;
use crate::nn::model::{hwc_to_chw, CnnModel, LrcnModel};
use crate::sequence::EyeSequence;
use crate::tensor::Tensor;

fn check_frames(frames: &[Tensor], input_shape: &[usize]) -> Result<()> {
    let want = [input_shape[1], input_shape[2], input_shape[0]];
    for (i, f) in frames.iter().enumerate() {
        if f.shape() != want {
            return Err(Error::shape(
                format!("frame {i}"),
                format!("model expects [H, W, C] = {want:?}, got {:?}", f.shape()),
            ));
        }
    }
    Ok(())
}

/// Independent per-frame `p_closed` from the frame classifier.
pub fn classify_cnn(seq: &EyeSequence, model: &CnnModel) -> Result<StateSeries> {
    check_frames(&seq.frames, model.network().input_shape())?;
    let p = seq
        .frames
        .iter()
        .map(|f| model.p_closed(&hwc_to_chw(f)?))
        .collect::<Result<Vec<_>>>()?;
    StateSeries::new("cnn", p)
}

/// Runs the recurrence over `frames` starting from `init`, returning the
/// per-frame `p_closed` and the state after the last frame.
pub fn classify_lrcn_from(model: &LrcnModel, frames: &[Tensor], init: &LstmState) -> Result<(Vec<f64>, LstmState)> {
    check_frames(frames, model.input_shape())?;
    let features = frames
        .iter()
        .map(|f| model.features(&hwc_to_chw(f)?))
        .collect::<Result<Vec<_>>>()?;
    model.run_features(init, &features)
}

pub fn classify_lrcn(seq: &EyeSequence, model: &LrcnModel) -> Result<StateSeries> {
    if seq.is_empty() {
        return Err(Error::InvalidArgument("LRCN needs at least one frame".into()));
    }
    let (p, _) = classify_lrcn_from(model, &seq.frames, &LstmState::zeros(model.hidden_size()))?;
    StateSeries::new("lrcn", p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarConfig {
    /// Odd length of the centered median window.
    pub window: usize,
    pub threshold: f64,
}

impl Default for EarConfig {
    fn default() -> Self {
        Self {
            window: 3,
            threshold: 0.2,
        }
    }
}

impl EarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "EAR window must be odd and ≥ 1, got {}",
                self.window
            )));
        }
        Ok(())
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median EAR over the centered window (shrunk at the ends), skipping
/// frames with degenerate landmarks. `None` where the frame itself is
/// degenerate.
pub fn windowed_ear(frames: &[LandmarkFrame], eye: EyeSide, window: usize) -> Vec<Option<f64>> {
    let raw: Vec<Option<f64>> = frames.iter().map(|f| ear(&f.eye(eye)).ok()).collect();
    let half = window / 2;
    (0..raw.len())
        .map(|t| {
            raw[t]?;
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(raw.len() - 1);
            let mut vals: Vec<f64> = raw[lo..=hi].iter().flatten().copied().collect();
            Some(median(&mut vals))
        })
        .collect()
}

/// `p_closed[t] = 1` when the windowed median EAR is below the threshold.
pub fn classify_ear(frames: &[LandmarkFrame], eye: EyeSide, config: &EarConfig) -> Result<StateSeries> {
    config.validate()?;
    let med = windowed_ear(frames, eye, config.window);
    let p = med
        .iter()
        .map(|m| match m {
            Some(v) if *v < config.threshold => 1.0,
            _ => 0.0,
        })
        .collect();
    let mut s = StateSeries::new("ear", p)?;
    s.invalid_frames = med
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_none())
        .map(|(i, _)| i)
        .collect();
    Ok(s)
}

#[derive(Clone, Debug)]
pub struct CnnClassifier {
    model: CnnModel,
    checksum: Option<String>,
}

impl CnnClassifier {
    pub fn new(model: CnnModel) -> Self {
        Self { model, checksum: None }
    }

    pub fn from_checkpoint(ckpt: &ModelCheckpoint) -> Result<Self> {
        Ok(Self {
            model: CnnModel::from_checkpoint(ckpt)?,
            checksum: Some(ckpt.checksum()?),
        })
    }

    pub fn model(&self) -> &CnnModel {
        &self.model
    }
}

impl EyeStateClassifier for CnnClassifier {
    fn name(&self) -> &str {
        "cnn"
    }

    fn classify(&self, input: &EyeInput<'_>) -> Result<StateSeries> {
        classify_cnn(input.require_crops("cnn")?, &self.model)
    }

    fn model_checksum(&self) -> Option<&str> {
        self.checksum.as_deref()
    }
}

#[derive(Clone, Debug)]
pub struct LrcnClassifier {
    model: LrcnModel,
    checksum: Option<String>,
}

impl LrcnClassifier {
    pub fn new(model: LrcnModel) -> Self {
        Self { model, checksum: None }
    }

    pub fn from_checkpoint(ckpt: &ModelCheckpoint) -> Result<Self> {
        Ok(Self {
            model: LrcnModel::from_checkpoint(ckpt)?,
            checksum: Some(ckpt.checksum()?),
        })
    }

    pub fn model(&self) -> &LrcnModel {
        &self.model
    }
}

impl EyeStateClassifier for LrcnClassifier {
    fn name(&self) -> &str {
        "lrcn"
    }

    fn classify(&self, input: &EyeInput<'_>) -> Result<StateSeries> {
        classify_lrcn(input.require_crops("lrcn")?, &self.model)
    }

    fn model_checksum(&self) -> Option<&str> {
        self.checksum.as_deref()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EarClassifier {
    config: EarConfig,
}

impl EarClassifier {
    pub fn new(config: EarConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl EyeStateClassifier for EarClassifier {
    fn name(&self) -> &str {
        "ear"
    }

    fn classify(&self, input: &EyeInput<'_>) -> Result<StateSeries> {
        classify_ear(input.require_landmarks("ear")?, input.eye, &self.config)
    }

    /// Negated windowed EAR; degenerate frames rank as most open.
    fn scores(&self, input: &EyeInput<'_>) -> Result<Vec<f64>> {
        let med = windowed_ear(input.require_landmarks("ear")?, input.eye, self.config.window);
        Ok(med.into_iter().map(|m| m.map_or(f64::NEG_INFINITY, |v| -v)).collect())
    }
}
