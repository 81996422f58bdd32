use anyhow::{bail, ensure, Context, Result};
use blinkscan_core::eval::dataset::{load_episode_landmarks, load_episodes, Manifest, Split};
use blinkscan_core::eval::roc::roc;
use blinkscan_core::eval::synth::{perturb_landmarks, stream_rng};
use blinkscan_core::geometry::landmarks::{EyeSide, LandmarkFrame};
use blinkscan_core::nn::checkpoint::{ModelCheckpoint, ModelKind};
use blinkscan_core::pipeline::{ClassifierOptions, ClassifierRegistry, EyeInput};
use blinkscan_core::sequence::EyeSequence;
use serde::Serialize;
use serde_json::json;

use super::{create, output_dir, single_input, write_json};
use crate::config::{EvalConfig, RunConfig, OUTPUT_FORMAT_VERSION};
use crate::{CommonArgs, Outcome};

#[derive(Clone, Debug, Serialize)]
pub struct MethodResult {
    pub method: String,
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub roc_csv: String,
    pub model_checksum: Option<String>,
}

/// Model kind a built-in method loads, if any.
pub fn checkpoint_kind(method: &str) -> Option<ModelKind> {
    match method {
        "cnn" => Some(ModelKind::Cnn),
        "lrcn" => Some(ModelKind::Lrcn),
        _ => None,
    }
}

/// Labelled test data: crops and landmarks per episode.
pub struct TestSet {
    pub crops: Vec<EyeSequence>,
    pub landmarks: Vec<Vec<LandmarkFrame>>,
    pub eye: EyeSide,
}

pub fn load_test_set(manifest: &Manifest, root: &std::path::Path) -> Result<TestSet> {
    let (mut crops, mut landmarks) = (Vec::new(), Vec::new());
    let mut eye = None;
    for v in manifest.videos(Split::Test) {
        ensure!(eye.is_none_or(|e| e == v.eye), "test videos label different eyes");
        eye = Some(v.eye);
        crops.extend(load_episodes(root, v)?);
        landmarks.extend(load_episode_landmarks(root, v)?);
    }
    ensure!(!crops.is_empty(), "manifest lists no test videos");
    Ok(TestSet {
        crops,
        landmarks,
        eye: eye.unwrap_or(EyeSide::Left),
    })
}

pub fn run(config: &RunConfig, args: &CommonArgs) -> Result<Outcome> {
    let manifest_path = single_input(args)?;
    let manifest = Manifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(std::path::Path::new("."));
    let out = output_dir(args)?;
    let mut cfg: EvalConfig = config.eval.clone();
    if !args.method.is_empty() {
        cfg.methods = args.method.clone();
    }

    let mut checkpoints = Vec::new();
    for p in &args.checkpoint {
        checkpoints.push(ModelCheckpoint::load(p)?);
    }
    let find = |kind: ModelKind| checkpoints.iter().find(|c| c.meta.kind == kind);
    let registry = ClassifierRegistry::default();
    if cfg.methods.is_empty() {
        cfg.methods = registry
            .names()
            .filter(|m| checkpoint_kind(m).is_none_or(|k| find(k).is_some()))
            .map(str::to_string)
            .collect();
    }

    let data = load_test_set(&manifest, root)?;
    let labels: Vec<u8> = data
        .crops
        .iter()
        .map(|s| s.labels.clone().context("test data is unlabelled"))
        .collect::<Result<Vec<_>>>()?
        .concat();

    let mut noise_rng = stream_rng(config.seed, 0);
    let landmarks: Vec<Vec<LandmarkFrame>> = if cfg.landmark_noise_px > 0.0 {
        data.landmarks
            .iter()
            .map(|l| perturb_landmarks(l, cfg.landmark_noise_px, &mut noise_rng))
            .collect::<Result<_, _>>()?
    } else {
        data.landmarks.clone()
    };

    let mut results = Vec::new();
    for method in &cfg.methods {
        let checkpoint = match checkpoint_kind(method) {
            Some(kind) => Some(
                find(kind)
                    .with_context(|| format!("method `{method}` needs a {kind:?} checkpoint (--checkpoint)"))?
                    .clone(),
            ),
            None => None,
        };
        let classifier = registry.build(
            method,
            &ClassifierOptions {
                checkpoint,
                ear: cfg.ear,
            },
        )?;
        let mut scores = Vec::with_capacity(labels.len());
        for (crops, lm) in data.crops.iter().zip(&landmarks) {
            let input = EyeInput {
                eye: data.eye,
                crops: Some(crops),
                landmarks: Some(lm),
            };
            let s = classifier.scores(&input)?;
            if s.len() != crops.len() {
                bail!(
                    "method `{method}` returned {} scores for {} frames",
                    s.len(),
                    crops.len()
                );
            }
            scores.extend(s);
        }
        let curve = roc(&scores, &labels)?;
        let csv = format!("roc_{method}.csv");
        curve.write_csv(create(&out.join(&csv))?)?;
        println!("{method}: AUC {:.4}", curve.auc);
        results.push(MethodResult {
            method: method.clone(),
            auc: curve.auc,
            n_pos: curve.n_pos,
            n_neg: curve.n_neg,
            roc_csv: csv,
            model_checksum: classifier.model_checksum().map(str::to_string),
        });
    }
    results.sort_by(|a, b| b.auc.total_cmp(&a.auc).then_with(|| a.method.cmp(&b.method)));

    write_json(
        &out.join("eval.json"),
        &json!({
            "format_version": OUTPUT_FORMAT_VERSION,
            "config": { "seed": config.seed, "eval": &cfg },
            "dataset_seed": manifest.seed,
            "sequences": data.crops.len(),
            "frames": labels.len(),
            "results": results,
        }),
    )?;
    Ok(Outcome::Done)
}
