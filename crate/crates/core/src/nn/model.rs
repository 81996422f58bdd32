//! The frame classifier (conv blocks + fully-connected head) and the
//! recurrent classifier built on its frozen feature extractor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{CheckpointMeta, ModelCheckpoint, ModelKind};
use super::layers::{LayerSpec, Mode, Sequential};
use super::loss::{cross_entropy, cross_entropy_grad};
use super::lstm::{init_lstm_params, lstm_backward, lstm_step, lstm_unroll, LstmState, LstmWeights};
use super::params::Params;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CNN_PREFIX: &str = "cnn.";
pub const LSTM_PREFIX: &str = "lstm.";
pub const HEAD_PREFIX: &str = "head.";

/// Class index of the open-eye state.
pub const OPEN: usize = 0;
/// Class index of the closed-eye state.
pub const CLOSED: usize = 1;

/// Conv-block classifier layout.
///
/// Each block is `convs_per_block` × (3×3 same conv, ReLU) followed by a
/// 2×2/2 max-pool. After flattening, a projection of `feature_dim` units
/// (ReLU) ends the feature extractor; the classifier continues with
/// dropout, a hidden layer of `hidden_dim` units, dropout, and a two-way
/// softmax.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnArchitecture {
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub block_channels: Vec<usize>,
    pub convs_per_block: usize,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
}

impl Default for CnnArchitecture {
    fn default() -> Self {
        Self {
            input_channels: 1,
            input_height: 36,
            input_width: 60,
            block_channels: vec![8, 16, 32],
            convs_per_block: 1,
            feature_dim: 256,
            hidden_dim: 64,
            dropout: 0.5,
        }
    }
}

impl CnnArchitecture {
    /// VGG16 convolutional layout (13 convs in five blocks) at 224×224 RGB.
    pub fn vgg16() -> Self {
        Self {
            input_channels: 3,
            input_height: 224,
            input_width: 224,
            block_channels: vec![64, 128, 256, 512, 512],
            convs_per_block: 2,
            feature_dim: 4096,
            hidden_dim: 4096,
            dropout: 0.5,
        }
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [self.input_channels, self.input_height, self.input_width]
    }

    /// Returns the layer list and the length of its feature-extractor prefix.
    pub fn layers(&self) -> Result<(Vec<LayerSpec>, usize)> {
        if self.block_channels.is_empty() || self.convs_per_block == 0 {
            return Err(Error::InvalidArgument("at least one conv block required".into()));
        }
        let mut layers = Vec::new();
        let mut c = self.input_channels;
        let (mut h, mut w) = (self.input_height, self.input_width);
        for &out in &self.block_channels {
            for _ in 0..self.convs_per_block {
                layers.push(LayerSpec::conv3x3(c, out));
                layers.push(LayerSpec::relu());
                c = out;
            }
            layers.push(LayerSpec::MaxPool2d { size: 2, stride: 2 });
            if h < 2 || w < 2 {
                return Err(Error::InvalidArgument(format!(
                    "input {}x{} too small for {} pooling blocks",
                    self.input_height,
                    self.input_width,
                    self.block_channels.len()
                )));
            }
            h /= 2;
            w /= 2;
        }
        layers.push(LayerSpec::Flatten);
        layers.push(LayerSpec::fc(c * h * w, self.feature_dim));
        layers.push(LayerSpec::relu());
        let feature_layers = layers.len();
        layers.push(LayerSpec::Dropout { p: self.dropout });
        layers.push(LayerSpec::fc(self.feature_dim, self.hidden_dim));
        layers.push(LayerSpec::relu());
        layers.push(LayerSpec::Dropout { p: self.dropout });
        layers.push(LayerSpec::fc(self.hidden_dim, 2));
        layers.push(LayerSpec::Softmax);
        Ok((layers, feature_layers))
    }
}

/// Converts an `[H, W, C]` image to the `[C, H, W]` layout the network uses.
pub fn hwc_to_chw(frame: &Tensor) -> Result<Tensor> {
    let &[h, w, c] = frame.shape() else {
        return Err(Error::shape(
            "frame",
            format!("expected [H, W, C], got {:?}", frame.shape()),
        ));
    };
    let src = frame.data();
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                out[(ch * h + y) * w + x] = src[(y * w + x) * c + ch];
            }
        }
    }
    Tensor::new(vec![c, h, w], out)
}

/// Frame-level eye-state classifier.
#[derive(Clone, Debug)]
pub struct CnnModel {
    net: Sequential,
    params: Params,
    feature_layers: usize,
}

impl CnnModel {
    pub fn new(arch: &CnnArchitecture, rng: &mut impl Rng) -> Result<Self> {
        let (layers, feature_layers) = arch.layers()?;
        let net = Sequential::new(layers, &arch.input_shape(), CNN_PREFIX)?;
        let params = net.init_params(rng);
        Ok(Self {
            net,
            params,
            feature_layers,
        })
    }

    pub fn from_parts(net: Sequential, params: Params, feature_layers: usize) -> Result<Self> {
        net.validate_params(&params)?;
        if feature_layers == 0 || feature_layers > net.layers().len() {
            return Err(Error::InvalidArgument(format!("bad feature split {feature_layers}")));
        }
        Ok(Self {
            net,
            params,
            feature_layers,
        })
    }

    pub fn from_checkpoint(ckpt: &ModelCheckpoint) -> Result<Self> {
        let m = &ckpt.meta;
        let net = Sequential::new(
            m.architecture.clone(),
            &[m.input_channels, m.input_height, m.input_width],
            CNN_PREFIX,
        )?;
        let (cnn_params, _) = ckpt.params().split_prefix(CNN_PREFIX);
        Self::from_parts(net, cnn_params, m.feature_layers)
    }

    pub fn network(&self) -> &Sequential {
        &self.net
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn feature_layers(&self) -> usize {
        self.feature_layers
    }

    /// Class probabilities `[p_open, p_closed]` for a `[C, H, W]` input.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        self.net.forward(&self.params, input, Mode::Infer)
    }

    pub fn p_closed(&self, input: &Tensor) -> Result<f64> {
        Ok(self.predict(input)?.data()[CLOSED])
    }

    /// Output of the feature-extractor prefix (inference mode).
    pub fn features(&self, input: &Tensor) -> Result<Tensor> {
        self.feature_extractor()?.forward(&self.params, input, Mode::Infer)
    }

    pub fn feature_extractor(&self) -> Result<Sequential> {
        self.net.truncated(self.feature_layers)
    }

    pub fn feature_dim(&self) -> usize {
        self.net.shape_at(self.feature_layers).iter().product()
    }

    pub fn to_checkpoint(&self, epoch: usize, seed: u64, config: serde_json::Value) -> ModelCheckpoint {
        let shape = self.net.input_shape();
        let meta = CheckpointMeta {
            kind: ModelKind::Cnn,
            input_channels: shape[0],
            input_height: shape[1],
            input_width: shape[2],
            hidden_size: None,
            epoch,
            seed,
            architecture: self.net.layers().to_vec(),
            feature_layers: self.feature_layers,
            tensor_count: 0,
            config,
        };
        ModelCheckpoint::new(meta, &self.params)
    }
}

/// Recurrent classifier: frozen conv features → LSTM → two-way softmax per
/// step.
#[derive(Clone, Debug)]
pub struct LrcnModel {
    cnn_arch: Vec<LayerSpec>,
    features: Sequential,
    feature_params: Params,
    feature_layers: usize,
    head: Sequential,
    /// LSTM and head parameters; the only trainable part.
    params: Params,
    hidden: usize,
}

impl LrcnModel {
    /// Attaches a freshly initialized LSTM and head to the feature extractor
    /// of a trained frame classifier.
    pub fn from_cnn(cnn: &CnnModel, hidden: usize, rng: &mut impl Rng) -> Result<Self> {
        let features = cnn.feature_extractor()?;
        let feature_dim = cnn.feature_dim();
        let mut feature_params = Params::new();
        for (name, _) in features.param_shapes() {
            feature_params.insert(name.clone(), cnn.params().get(&name)?.clone());
        }
        let head = Self::head_network(hidden)?;
        let mut params = init_lstm_params(LSTM_PREFIX, feature_dim, hidden, rng);
        params.extend(head.init_params(rng));
        Ok(Self {
            cnn_arch: cnn.network().layers().to_vec(),
            features,
            feature_params,
            feature_layers: cnn.feature_layers(),
            head,
            params,
            hidden,
        })
    }

    pub fn from_checkpoint(ckpt: &ModelCheckpoint) -> Result<Self> {
        let m = &ckpt.meta;
        if m.kind != ModelKind::Lrcn {
            return Err(Error::IncompatibleCheckpoint("not an LRCN checkpoint".into()));
        }
        let hidden = m
            .hidden_size
            .ok_or_else(|| Error::IncompatibleCheckpoint("missing hidden size".into()))?;
        let net = Sequential::new(
            m.architecture.clone(),
            &[m.input_channels, m.input_height, m.input_width],
            CNN_PREFIX,
        )?;
        let features = net.truncated(m.feature_layers)?;
        let all = ckpt.params();
        let (feature_params, rest) = all.split_prefix(CNN_PREFIX);
        features.validate_params(&feature_params)?;
        let head = Self::head_network(hidden)?;
        let model = Self {
            cnn_arch: m.architecture.clone(),
            features,
            feature_params,
            feature_layers: m.feature_layers,
            head,
            params: rest,
            hidden,
        };
        model.weights()?;
        model.head.validate_params(&model.params)?;
        Ok(model)
    }

    fn head_network(hidden: usize) -> Result<Sequential> {
        Sequential::new(
            vec![LayerSpec::fc(hidden, 2), LayerSpec::Softmax],
            &[hidden],
            HEAD_PREFIX,
        )
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn feature_dim(&self) -> usize {
        self.features.output_shape().iter().product()
    }

    pub fn input_shape(&self) -> &[usize] {
        self.features.input_shape()
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn feature_params(&self) -> &Params {
        &self.feature_params
    }

    pub fn weights(&self) -> Result<LstmWeights<'_>> {
        let w = LstmWeights::from_params(&self.params, LSTM_PREFIX)?;
        if w.input_dim() != self.feature_dim() || w.hidden_size() != self.hidden {
            return Err(Error::IncompatibleCheckpoint(format!(
                "LSTM expects {} inputs / {} hidden, extractor gives {} / model says {}",
                w.input_dim(),
                w.hidden_size(),
                self.feature_dim(),
                self.hidden
            )));
        }
        Ok(w)
    }

    /// Frozen per-frame features for a `[C, H, W]` input.
    pub fn features(&self, input: &Tensor) -> Result<Tensor> {
        let f = self.features.forward(&self.feature_params, input, Mode::Infer)?;
        let n = f.len();
        f.reshape(&[n])
    }

    /// Advances the recurrence by one frame; returns the new state and the
    /// class probabilities for that frame.
    pub fn step(&self, state: &LstmState, input: &Tensor) -> Result<(LstmState, Tensor)> {
        let x = self.features(input)?;
        self.step_features(state, &x)
    }

    pub fn step_features(&self, state: &LstmState, x: &Tensor) -> Result<(LstmState, Tensor)> {
        let (next, _) = lstm_step(state, x, &self.weights()?)?;
        let p = self.head.forward(&self.params, &next.hidden, Mode::Infer)?;
        Ok((next, p))
    }

    /// Per-step `p_closed` over a sequence of precomputed features, threading
    /// state from `init`. Returns the final state for continuation.
    pub fn run_features(&self, init: &LstmState, features: &[Tensor]) -> Result<(Vec<f64>, LstmState)> {
        let mut state = init.clone();
        let mut out = Vec::with_capacity(features.len());
        for x in features {
            let (next, p) = self.step_features(&state, x)?;
            out.push(p.data()[CLOSED]);
            state = next;
        }
        Ok((out, state))
    }

    /// Mean per-step cross-entropy of a labelled feature sequence and its
    /// gradient with respect to the LSTM and head parameters.
    pub fn sequence_loss_and_grads(&self, features: &[Tensor], labels: &[usize]) -> Result<(f64, Params)> {
        Self::sequence_loss_and_grads_with(&self.params, &self.head, self.hidden, features, labels)
    }

    pub fn sequence_loss(&self, params: &Params, features: &[Tensor], labels: &[usize]) -> Result<f64> {
        if features.len() != labels.len() || features.is_empty() {
            return Err(Error::shape(
                "sequence",
                "features and labels differ in length or are empty",
            ));
        }
        let w = LstmWeights::from_params(params, LSTM_PREFIX)?;
        let steps = lstm_unroll(&LstmState::zeros(self.hidden), features, &w)?;
        let mut loss = 0.0;
        for (s, &y) in steps.iter().zip(labels) {
            let p = self.head.forward(params, &s.state.hidden, Mode::Infer)?;
            loss += cross_entropy(&p, y)?;
        }
        Ok(loss / labels.len() as f64)
    }

    fn sequence_loss_and_grads_with(
        params: &Params,
        head: &Sequential,
        hidden: usize,
        features: &[Tensor],
        labels: &[usize],
    ) -> Result<(f64, Params)> {
        if features.len() != labels.len() || features.is_empty() {
            return Err(Error::shape(
                "sequence",
                "features and labels differ in length or are empty",
            ));
        }
        let w = LstmWeights::from_params(params, LSTM_PREFIX)?;
        let steps = lstm_unroll(&LstmState::zeros(hidden), features, &w)?;
        let scale = 1.0 / labels.len() as f64;
        let mut grads = Params::new();
        let mut d_hidden = Vec::with_capacity(steps.len());
        let mut loss = 0.0;
        for (s, &y) in steps.iter().zip(labels) {
            let trace = head.forward_trace(params, &s.state.hidden, Mode::Infer)?;
            loss += cross_entropy(trace.output(), y)?;
            let mut dp = cross_entropy_grad(trace.output(), y)?;
            dp.scale(scale);
            d_hidden.push(head.backward(params, &trace, &dp, &mut grads)?);
        }
        lstm_backward(&steps, &d_hidden, &w, LSTM_PREFIX, &mut grads)?;
        Ok((loss * scale, grads))
    }

    pub fn to_checkpoint(&self, epoch: usize, seed: u64, config: serde_json::Value) -> ModelCheckpoint {
        let shape = self.features.input_shape();
        let meta = CheckpointMeta {
            kind: ModelKind::Lrcn,
            input_channels: shape[0],
            input_height: shape[1],
            input_width: shape[2],
            hidden_size: Some(self.hidden),
            epoch,
            seed,
            architecture: self.cnn_arch.clone(),
            feature_layers: self.feature_layers,
            tensor_count: 0,
            config,
        };
        let mut all = self.feature_params.clone();
        all.extend(self.params.clone());
        ModelCheckpoint::new(meta, &all)
    }
}
