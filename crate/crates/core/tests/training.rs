use blinkscan_core::eval::augment::{augment_frame, augment_sequence, AugmentConfig};
use blinkscan_core::eval::dataset::{LabeledFrameSet, LabeledSequenceSet};
use blinkscan_core::eval::synth::{make_synthetic_benchmarks, BenchmarkConfig, RenderConfig};
use blinkscan_core::eval::train::{train_cnn, train_lrcn, CnnTrainConfig, LrcnTrainConfig};
use blinkscan_core::geometry::landmarks::EyeSide;
use blinkscan_core::nn::model::CnnArchitecture;
use blinkscan_core::sequence::EyeSequence;
use blinkscan_core::{Error, Tensor};
use proptest::prelude::*;
use serde_json::Value;

fn tiny_benchmark() -> BenchmarkConfig {
    BenchmarkConfig {
        train_frames: 60,
        test_frames: 10,
        train_sequences: 6,
        test_sequences: 2,
        render: RenderConfig {
            crop_height: 12,
            crop_width: 20,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn cnn_config(epochs: usize) -> CnnTrainConfig {
    CnnTrainConfig {
        architecture: CnnArchitecture {
            input_height: 12,
            input_width: 20,
            block_channels: vec![2, 4],
            feature_dim: 8,
            hidden_dim: 4,
            ..Default::default()
        },
        epochs,
        batch_size: 8,
        ..Default::default()
    }
}

fn lrcn_config(epochs: usize) -> LrcnTrainConfig {
    LrcnTrainConfig {
        hidden_size: 4,
        epochs,
        ..Default::default()
    }
}

/// `0.01 · 0.9^k` written out in decimal and parsed once.
fn decimal_lr(epoch: usize) -> f64 {
    let k = (epoch / 2) as u32;
    format!("{}e-{}", 9u128.pow(k), k + 2).parse().unwrap()
}

#[test]
fn two_step_training_is_reproducible_and_keeps_features_frozen() {
    let b = make_synthetic_benchmarks(4, &tiny_benchmark()).unwrap();
    let seqs = LabeledSequenceSet::new(b.train.iter().map(|e| e.crops.clone()).collect()).unwrap();

    let cnn_a = train_cnn(&b.train_frames, &cnn_config(4), 9).unwrap();
    let cnn_b = train_cnn(&b.train_frames, &cnn_config(4), 9).unwrap();
    let ck_a = cnn_a.checkpoint(9, Value::Null);
    assert_eq!(
        ck_a.checksum().unwrap(),
        cnn_b.checkpoint(9, Value::Null).checksum().unwrap()
    );
    assert_eq!(cnn_a.log, cnn_b.log);
    let other = train_cnn(&b.train_frames, &cnn_config(4), 10).unwrap();
    assert_ne!(
        ck_a.checksum().unwrap(),
        other.checkpoint(10, Value::Null).checksum().unwrap()
    );

    let lrcn = train_lrcn(&seqs, &ck_a, &lrcn_config(3), 1).unwrap();
    let again = train_lrcn(&seqs, &ck_a, &lrcn_config(3), 1).unwrap();
    let lk = lrcn.checkpoint(1, Value::Null);
    assert_eq!(
        lk.checksum().unwrap(),
        again.checkpoint(1, Value::Null).checksum().unwrap()
    );

    let feature_names: Vec<&str> = lrcn.model.feature_params().iter().map(|(n, _)| n).collect();
    assert!(!feature_names.is_empty());
    assert_eq!(
        lk.tensor_digest(feature_names.iter().copied()).unwrap(),
        ck_a.tensor_digest(feature_names.iter().copied()).unwrap()
    );
    assert!(lrcn.log.entries.iter().all(|e| e.loss.is_finite()));
}

#[test]
fn logged_learning_rate_follows_the_schedule() {
    let b = make_synthetic_benchmarks(
        5,
        &BenchmarkConfig {
            train_frames: 16,
            ..tiny_benchmark()
        },
    )
    .unwrap();
    let cfg = CnnTrainConfig {
        batch_size: 16,
        ..cnn_config(30)
    };
    let trained = train_cnn(&b.train_frames, &cfg, 0).unwrap();
    assert_eq!(trained.log.entries.len(), 30);
    let mut csv = Vec::new();
    trained.log.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    for (epoch, line) in text.lines().skip(1).enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], epoch.to_string());
        assert_eq!(cols[2].parse::<f64>().unwrap(), decimal_lr(epoch), "epoch {epoch}");
    }
    assert_eq!(text.lines().nth(3).unwrap().split(',').nth(2), Some("0.009"));
}

#[test]
fn single_class_data_is_rejected() {
    let mut set = LabeledFrameSet::default();
    for _ in 0..4 {
        set.push(Tensor::zeros(&[12, 20, 1]), 0, "x").unwrap();
    }
    assert!(matches!(train_cnn(&set, &cnn_config(1), 0), Err(Error::SingleClass)));
}

#[test]
fn lrcn_needs_a_frame_classifier_checkpoint() {
    let b = make_synthetic_benchmarks(6, &tiny_benchmark()).unwrap();
    let seqs = LabeledSequenceSet::new(b.train.iter().map(|e| e.crops.clone()).collect()).unwrap();
    let cnn = train_cnn(&b.train_frames, &cnn_config(1), 0)
        .unwrap()
        .checkpoint(0, Value::Null);
    let lrcn = train_lrcn(&seqs, &cnn, &lrcn_config(1), 0)
        .unwrap()
        .checkpoint(0, Value::Null);
    assert!(matches!(
        train_lrcn(&seqs, &lrcn, &lrcn_config(1), 0),
        Err(Error::IncompatibleCheckpoint(_))
    ));
    let wide = CnnTrainConfig {
        architecture: CnnArchitecture {
            input_height: 24,
            input_width: 40,
            ..cnn_config(1).architecture
        },
        ..cnn_config(1)
    };
    let mut big = LabeledFrameSet::default();
    big.push(Tensor::zeros(&[24, 40, 1]), 0, "a").unwrap();
    big.push(Tensor::filled(&[24, 40, 1], 1.0), 1, "b").unwrap();
    let mismatched = train_cnn(&big, &wide, 0).unwrap().checkpoint(0, Value::Null);
    assert!(matches!(
        train_lrcn(&seqs, &mismatched, &lrcn_config(1), 0),
        Err(Error::IncompatibleCheckpoint(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn augmentation_keeps_labels_length_and_range(
        n in 1usize..8,
        seed in 0u64..10_000,
        values in prop::collection::vec(0.0..=1.0f64, 12),
    ) {
        let frames: Vec<Tensor> = (0..n).map(|k| {
            Tensor::new(vec![3, 4, 1], values.iter().map(|v| (v + k as f64 * 0.1) % 1.0).collect()).unwrap()
        }).collect();
        let labels: Vec<u8> = (0..n).map(|k| (k % 2) as u8).collect();
        let seq = EyeSequence::new(frames, 25.0, EyeSide::Left).unwrap().with_labels(labels.clone()).unwrap();
        let (out, params) = augment_sequence(&seq, seed, &AugmentConfig::default()).unwrap();
        prop_assert_eq!(out.len(), n);
        prop_assert_eq!(out.labels.as_ref(), Some(&labels));
        for (a, b) in out.frames.iter().zip(&seq.frames) {
            prop_assert_eq!(a.shape(), b.shape());
            prop_assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(a, &augment_frame(b, &params).unwrap());
        }
        let (again, _) = augment_sequence(&seq, seed, &AugmentConfig::default()).unwrap();
        prop_assert_eq!(again, out);
    }
}
