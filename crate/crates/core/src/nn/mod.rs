//! Differentiable building blocks: layers, the LSTM cell, losses,
//! optimizers, finite-difference gradient checking and checkpoints.

pub mod activation;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod lstm;
pub mod model;
pub mod optim;
pub mod params;

pub use activation::{sigmoid, tanh_act, Activation};
pub use checkpoint::{CheckpointMeta, ModelCheckpoint, ModelKind};
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{LayerSpec, Mode, Padding, Sequential};
pub use loss::{cross_entropy, cross_entropy_grad};
pub use lstm::{lstm_step, Gates, LstmState, LstmWeights};
pub use model::{CnnArchitecture, CnnModel, LrcnModel};
pub use optim::{lr_schedule, sgd_update, Adam, AdamConfig, Optimizer, Sgd, SgdConfig};
pub use params::Params;
