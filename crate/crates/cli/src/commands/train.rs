use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use blinkscan_core::eval::dataset::{load_episodes, LabeledFrameSet, LabeledSequenceSet, Manifest, Split};
use blinkscan_core::eval::train::{train_cnn, train_lrcn};
use blinkscan_core::nn::checkpoint::{ModelCheckpoint, ModelKind};
use blinkscan_core::sequence::EbsqFile;
use serde_json::json;

use super::{create, output_dir, single_input, write_json};
use crate::config::{RunConfig, Stages, TrainConfig, OUTPUT_FORMAT_VERSION};
use crate::{CommonArgs, Outcome};

pub const CNN_CHECKPOINT: &str = "cnn.bscp";
pub const LRCN_CHECKPOINT: &str = "lrcn.bscp";

fn manifest_root(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn load_frames(manifest: &Manifest, root: &Path) -> Result<LabeledFrameSet> {
    let entry = manifest
        .frame_set(Split::Train)
        .context("manifest lists no training frame set")?;
    let seq = EbsqFile::load(root.join(&entry.path))?.into_sequence(1.0, None)?;
    Ok(LabeledFrameSet::from_sequence(seq, "train")?)
}

fn load_sequences(manifest: &Manifest, root: &Path) -> Result<LabeledSequenceSet> {
    let mut items = Vec::new();
    for v in manifest.videos(Split::Train) {
        items.extend(load_episodes(root, v)?);
    }
    Ok(LabeledSequenceSet::new(items)?)
}

pub fn run(config: &RunConfig, args: &CommonArgs) -> Result<Outcome> {
    let manifest_path = single_input(args)?;
    let manifest = Manifest::load(manifest_path)?;
    let root = manifest_root(manifest_path);
    let out = output_dir(args)?;
    let mut cfg: TrainConfig = config.train.clone();
    let seed = config.seed;

    let cnn_data = match cfg.stages {
        Stages::Both | Stages::Cnn => {
            if !args.checkpoint.is_empty() {
                bail!("--checkpoint is only used with the lrcn stage");
            }
            let data = load_frames(&manifest, root)?;
            let shape = data.frames.first().context("training frame set is empty")?.shape();
            cfg.cnn.architecture.input_height = shape[0];
            cfg.cnn.architecture.input_width = shape[1];
            cfg.cnn.architecture.input_channels = shape[2];
            Some(data)
        }
        Stages::Lrcn => None,
    };
    let effective = json!({ "seed": seed, "train": &cfg });

    let mut artifacts = serde_json::Map::new();
    let cnn_ckpt = match cnn_data {
        Some(data) => {
            let trained = train_cnn(&data, &cfg.cnn, seed)?;
            let ckpt = trained.checkpoint(seed, effective.clone());
            ckpt.save(out.join(CNN_CHECKPOINT))?;
            trained.log.write_csv(create(&out.join("cnn_log.csv"))?)?;
            artifacts.insert(
                "cnn".into(),
                json!({
                    "checkpoint": CNN_CHECKPOINT,
                    "log": "cnn_log.csv",
                    "checksum": ckpt.checksum()?,
                    "final_loss": trained.log.entries.last().map(|e| e.loss),
                }),
            );
            println!(
                "cnn: {} epochs, checkpoint {}",
                trained.epochs,
                out.join(CNN_CHECKPOINT).display()
            );
            ckpt
        }
        None => {
            let path = match args.checkpoint.as_slice() {
                [p] => p,
                [] => bail!("LRCN training needs a trained CNN checkpoint (--checkpoint); run the cnn stage first"),
                _ => bail!("expected one --checkpoint"),
            };
            let ckpt = ModelCheckpoint::load(path)?;
            ensure!(
                ckpt.meta.kind == ModelKind::Cnn,
                "{} is not a CNN checkpoint",
                path.display()
            );
            ckpt
        }
    };

    if cfg.stages != Stages::Cnn {
        let data = load_sequences(&manifest, root)?;
        let trained = train_lrcn(&data, &cnn_ckpt, &cfg.lrcn, seed.wrapping_add(1))?;
        let ckpt = trained.checkpoint(seed, effective.clone());
        ckpt.save(out.join(LRCN_CHECKPOINT))?;
        trained.log.write_csv(create(&out.join("lrcn_log.csv"))?)?;
        artifacts.insert(
            "lrcn".into(),
            json!({
                "checkpoint": LRCN_CHECKPOINT,
                "log": "lrcn_log.csv",
                "checksum": ckpt.checksum()?,
                "frozen_cnn_checksum": cnn_ckpt.checksum()?,
                "final_loss": trained.log.entries.last().map(|e| e.loss),
            }),
        );
        println!(
            "lrcn: {} epochs, checkpoint {}",
            trained.epochs,
            out.join(LRCN_CHECKPOINT).display()
        );
    }

    write_json(
        &out.join("train.json"),
        &json!({
            "format_version": OUTPUT_FORMAT_VERSION,
            "config": effective,
            "dataset_seed": manifest.seed,
            "models": artifacts,
        }),
    )?;
    Ok(Outcome::Done)
}
