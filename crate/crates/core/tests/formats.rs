use blinkscan_core::geometry::landmarks::{read_landmarks_jsonl, write_landmarks_jsonl, EyeSide, LandmarkFrame};
use blinkscan_core::nn::checkpoint::ModelCheckpoint;
use blinkscan_core::nn::model::{CnnArchitecture, CnnModel, LrcnModel};
use blinkscan_core::sequence::{EbsqFile, EyeSequence};
use blinkscan_core::{Error, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sequence_strategy() -> impl Strategy<Value = EyeSequence> {
    (1usize..6, 1usize..5, 1usize..7, 1usize..3, any::<bool>(), any::<bool>()).prop_flat_map(
        |(n, h, w, c, labelled, right)| {
            (
                prop::collection::vec(prop::collection::vec(0.0..1.0f64, h * w * c), n),
                prop::collection::vec(0u8..2, n),
            )
                .prop_map(move |(frames, labels)| {
                    // Pixels are stored as f32.
                    let frames = frames
                        .into_iter()
                        .map(|d| Tensor::new(vec![h, w, c], d.into_iter().map(|v| v as f32 as f64).collect()).unwrap())
                        .collect();
                    let eye = if right { EyeSide::Right } else { EyeSide::Left };
                    let s = EyeSequence::new(frames, 25.0, eye).unwrap();
                    if labelled {
                        s.with_labels(labels).unwrap()
                    } else {
                        s
                    }
                })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ebsq_round_trips(seq in sequence_strategy()) {
        let bytes = seq.to_ebsq().unwrap();
        let eye = seq.eye;
        let back = EbsqFile::parse(&bytes).unwrap().into_sequence(25.0, Some(eye)).unwrap();
        prop_assert_eq!(&back, &seq);
        prop_assert_eq!(back.to_ebsq().unwrap(), bytes);
    }

    #[test]
    fn truncated_ebsq_is_a_format_error(seq in sequence_strategy(), cut in 0.0..1.0f64) {
        let bytes = seq.to_ebsq().unwrap();
        let n = ((bytes.len() - 1) as f64 * cut) as usize;
        let pixels_end = 24 + seq.len() * seq.frames[0].len() * 4;
        match EbsqFile::parse(&bytes[..n]) {
            // Cutting exactly at the label block leaves a valid unlabelled file.
            Ok(f) => prop_assert!(n == pixels_end && f.labels.is_none() && seq.labels.is_some()),
            Err(e) => prop_assert!(matches!(e, Error::Format { .. }), "{e}"),
        }
    }
}

fn models() -> (CnnModel, LrcnModel) {
    let arch = CnnArchitecture {
        input_height: 8,
        input_width: 12,
        block_channels: vec![2, 3],
        feature_dim: 5,
        hidden_dim: 4,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cnn = CnnModel::new(&arch, &mut rng).unwrap();
    let lrcn = LrcnModel::from_cnn(&cnn, 3, &mut rng).unwrap();
    (cnn, lrcn)
}

#[test]
fn checkpoints_round_trip_and_reload() {
    let (cnn, lrcn) = models();
    let dir = tempfile::tempdir().unwrap();
    for (name, ck) in [
        ("cnn.bscp", cnn.to_checkpoint(3, 7, serde_json::json!({"k": 1}))),
        ("lrcn.bscp", lrcn.to_checkpoint(4, 7, serde_json::Value::Null)),
    ] {
        let path = dir.path().join(name);
        ck.save(&path).unwrap();
        let back = ModelCheckpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.checksum().unwrap(), ck.checksum().unwrap());
        assert_eq!(std::fs::read(&path).unwrap(), ck.to_bytes().unwrap());
    }
    let ck = lrcn.to_checkpoint(0, 0, serde_json::Value::Null);
    let reloaded = LrcnModel::from_checkpoint(&ck).unwrap();
    let x = Tensor::filled(&[1, 8, 12], 0.4);
    let init = blinkscan_core::nn::lstm::LstmState::zeros(3);
    let (_, a) = lrcn.step(&init, &x).unwrap();
    let (_, b) = reloaded.step(&init, &x).unwrap();
    assert!((a.data()[1] - b.data()[1]).abs() < 1e-5);
    assert!(CnnModel::from_checkpoint(&ck).is_err());
}

#[test]
fn corrupt_checkpoints_name_the_offset() {
    let (cnn, _) = models();
    let bytes = cnn.to_checkpoint(0, 0, serde_json::Value::Null).to_bytes().unwrap();
    match ModelCheckpoint::from_bytes(&bytes[..bytes.len() - 3]) {
        Err(Error::Format { offset, .. }) => assert!(offset > 12 && (offset as usize) < bytes.len()),
        other => panic!("{other:?}"),
    }
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(
        ModelCheckpoint::from_bytes(&bad),
        Err(Error::Format { offset: 0, .. })
    ));
}

#[test]
fn landmark_stream_round_trips_and_reports_bad_lines() {
    let frame = |k: u64| LandmarkFrame {
        frame_index: k,
        timestamp_s: k as f64 / 25.0,
        points: (0..68).map(|i| [i as f64 * 1.5, k as f64 + 0.25]).collect(),
        left_label: Some(1),
        right_label: None,
    };
    let frames = vec![frame(0), frame(1), frame(2)];
    let mut buf = Vec::new();
    write_landmarks_jsonl(&mut buf, &frames).unwrap();
    assert_eq!(read_landmarks_jsonl(buf.as_slice()).unwrap(), frames);

    let first_line = buf.iter().position(|&b| b == b'\n').unwrap() + 1;
    let mut broken = buf[..first_line].to_vec();
    broken.extend_from_slice(b"{\"frame_index\": 1, \"timestamp_s\": 0.04, \"points\": [[0, 0]]}\n");
    match read_landmarks_jsonl(broken.as_slice()) {
        Err(Error::Format { offset, .. }) => assert_eq!(offset as usize, first_line),
        other => panic!("{other:?}"),
    }
}
