//! Two-step training: the frame classifier with SGD, then the LSTM and head
//! on top of its frozen feature extractor with Adam.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::augment::{augment_frame, AugmentConfig, AugmentParams};
use super::dataset::{LabeledFrameSet, LabeledSequenceSet};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{ModelCheckpoint, ModelKind};
use crate::nn::layers::Mode;
use crate::nn::model::{hwc_to_chw, CnnArchitecture, CnnModel, LrcnModel};
use crate::nn::optim::{lr_schedule, Adam, AdamConfig, Optimizer, Sgd, SgdConfig};
use crate::nn::params::Params;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub epoch: usize,
    /// Mean training loss over the epoch.
    pub loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub entries: Vec<LogEntry>,
}

impl TrainingLog {
    /// CSV with columns `epoch, loss, lr`.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "loss", "lr"])?;
        for e in &self.entries {
            w.write_record([e.epoch.to_string(), e.loss.to_string(), e.lr.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnTrainConfig {
    pub architecture: CnnArchitecture,
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub momentum: f64,
    pub augment: Option<AugmentConfig>,
}

impl Default for CnnTrainConfig {
    fn default() -> Self {
        Self {
            architecture: CnnArchitecture::default(),
            epochs: 30,
            batch_size: 16,
            base_lr: 0.01,
            momentum: 0.9,
            augment: Some(AugmentConfig::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrcnTrainConfig {
    pub hidden_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub adam: AdamConfig,
    /// Applied per sequence; forces features to be recomputed every epoch.
    pub augment: Option<AugmentConfig>,
}

impl Default for LrcnTrainConfig {
    fn default() -> Self {
        Self {
            hidden_size: 256,
            epochs: 30,
            batch_size: 4,
            base_lr: 0.01,
            adam: AdamConfig::default(),
            augment: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedCnn {
    pub model: CnnModel,
    pub log: TrainingLog,
    pub epochs: usize,
}

impl TrainedCnn {
    pub fn checkpoint(&self, seed: u64, config: serde_json::Value) -> ModelCheckpoint {
        self.model.to_checkpoint(self.epochs, seed, config)
    }
}

#[derive(Clone, Debug)]
pub struct TrainedLrcn {
    pub model: LrcnModel,
    pub log: TrainingLog,
    pub epochs: usize,
}

impl TrainedLrcn {
    pub fn checkpoint(&self, seed: u64, config: serde_json::Value) -> ModelCheckpoint {
        self.model.to_checkpoint(self.epochs, seed, config)
    }
}

fn check_batch(batch_size: usize) -> Result<()> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    Ok(())
}

fn check_frame_shape(frame: &Tensor, input: &[usize]) -> Result<()> {
    let want = [input[1], input[2], input[0]];
    if frame.shape() != want {
        return Err(Error::shape(
            "training data",
            format!("frames are {:?}, model expects [H, W, C] = {want:?}", frame.shape()),
        ));
    }
    Ok(())
}

/// Mean cross-entropy of the model over a frame set (inference mode).
pub fn mean_frame_loss(model: &CnnModel, data: &LabeledFrameSet) -> Result<f64> {
    let mut total = 0.0;
    for (f, &y) in data.frames.iter().zip(&data.labels) {
        total += model
            .network()
            .loss(model.params(), &hwc_to_chw(f)?, y as usize, Mode::Infer)?;
    }
    Ok(total / data.len().max(1) as f64)
}

pub fn frame_accuracy(model: &CnnModel, data: &LabeledFrameSet) -> Result<f64> {
    let mut hits = 0;
    for (f, &y) in data.frames.iter().zip(&data.labels) {
        let closed = model.p_closed(&hwc_to_chw(f)?)? >= 0.5;
        hits += usize::from(closed == (y == 1));
    }
    Ok(hits as f64 / data.len().max(1) as f64)
}

/// Mini-batch SGD; the batch gradient is the mean of per-sample gradients
/// accumulated in batch order.
pub fn train_cnn(data: &LabeledFrameSet, config: &CnnTrainConfig, seed: u64) -> Result<TrainedCnn> {
    check_batch(config.batch_size)?;
    if !data.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = CnnModel::new(&config.architecture, &mut rng)?;
    check_frame_shape(&data.frames[0], model.network().input_shape())?;
    let mut opt = Sgd::new(SgdConfig {
        momentum: config.momentum,
    });
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainingLog::default();
    for epoch in 0..config.epochs {
        let lr = lr_schedule(config.base_lr, epoch);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.params().zeros_like();
            for &i in batch {
                let frame = match &config.augment {
                    Some(a) => augment_frame(&data.frames[i], &a.sample(&mut rng))?,
                    None => data.frames[i].clone(),
                };
                let mode = Mode::Train { seed: rng.gen() };
                let (loss, g) = model.network().loss_and_grads(
                    model.params(),
                    &hwc_to_chw(&frame)?,
                    data.labels[i] as usize,
                    mode,
                )?;
                epoch_loss += loss;
                grads.accumulate(&g, 1.0)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            opt.step(model.params_mut(), &grads, lr)?;
        }
        log.entries.push(LogEntry {
            epoch,
            loss: epoch_loss / data.len() as f64,
            lr,
        });
    }
    Ok(TrainedCnn {
        model,
        log,
        epochs: config.epochs,
    })
}

fn sequence_features(model: &LrcnModel, frames: &[Tensor], augment: Option<&AugmentParams>) -> Result<Vec<Tensor>> {
    frames
        .iter()
        .map(|f| {
            let f = match augment {
                Some(p) => augment_frame(f, p)?,
                None => f.clone(),
            };
            model.features(&hwc_to_chw(&f)?)
        })
        .collect()
}

/// Trains the LSTM and head of a fresh LRCN built on the frozen extractor
/// of `frozen`. Each batch sums the per-sequence gradients; sequences are
/// unrolled individually, never padded.
pub fn train_lrcn(
    data: &LabeledSequenceSet,
    frozen: &ModelCheckpoint,
    config: &LrcnTrainConfig,
    seed: u64,
) -> Result<TrainedLrcn> {
    check_batch(config.batch_size)?;
    if frozen.meta.kind != ModelKind::Cnn {
        return Err(Error::IncompatibleCheckpoint(
            "LRCN training needs a frame-classifier checkpoint".into(),
        ));
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("no training sequences".into()));
    }
    let cnn = CnnModel::from_checkpoint(frozen)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = LrcnModel::from_cnn(&cnn, config.hidden_size, &mut rng)?;
    for s in &data.items {
        if let Some(f) = s.frames.first() {
            check_frame_shape(f, model.input_shape()).map_err(|e| Error::IncompatibleCheckpoint(e.to_string()))?;
        }
    }
    let labels: Vec<Vec<usize>> = data
        .items
        .iter()
        .map(|s| {
            s.labels
                .as_ref()
                .map(|l| l.iter().map(|&y| y as usize).collect())
                .unwrap_or_default()
        })
        .collect();
    let mut cached = match config.augment {
        None => Some(
            data.items
                .iter()
                .map(|s| sequence_features(&model, &s.frames, None))
                .collect::<Result<Vec<_>>>()?,
        ),
        Some(_) => None,
    };
    let mut opt = Adam::new(config.adam);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainingLog::default();
    for epoch in 0..config.epochs {
        let lr = lr_schedule(config.base_lr, epoch);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads: Params = model.params().zeros_like();
            for &i in batch {
                let fresh;
                let feats = match (&mut cached, &config.augment) {
                    (Some(c), _) => &c[i],
                    (None, Some(a)) => {
                        let p = a.sample(&mut rng);
                        fresh = sequence_features(&model, &data.items[i].frames, Some(&p))?;
                        &fresh
                    }
                    (None, None) => unreachable!("features are cached when augmentation is off"),
                };
                let (loss, g) = model.sequence_loss_and_grads(feats, &labels[i])?;
                epoch_loss += loss;
                grads.accumulate(&g, 1.0)?;
            }
            opt.step(model.params_mut(), &grads, lr)?;
        }
        log.entries.push(LogEntry {
            epoch,
            loss: epoch_loss / data.len() as f64,
            lr,
        });
    }
    Ok(TrainedLrcn {
        model,
        log,
        epochs: config.epochs,
    })
}
