//! Datasets, synthetic benchmarks, augmentation, training and ROC scoring.

pub mod augment;
pub mod dataset;
pub mod render;
pub mod roc;
pub mod synth;
pub mod train;

pub use augment::{augment_frame, augment_sequence, AugmentConfig, AugmentParams};
pub use dataset::{ClipEntry, LabeledFrameSet, LabeledSequenceSet, Manifest, Split, VideoEntry};
pub use roc::{roc, RocCurve, RocPoint, RocSummary};
pub use synth::{make_synthetic_benchmarks, BenchmarkConfig, Benchmarks, SyntheticEpisode, SyntheticVideo};
pub use train::{train_cnn, train_lrcn, CnnTrainConfig, LrcnTrainConfig, TrainingLog};
