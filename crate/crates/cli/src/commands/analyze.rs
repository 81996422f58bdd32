use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use blinkscan_core::geometry::landmarks::{read_landmarks_jsonl, EyeSide, LandmarkFrame};
use blinkscan_core::nn::checkpoint::ModelCheckpoint;
use blinkscan_core::pipeline::report::write_series_csv;
use blinkscan_core::pipeline::{analyze, ClassifierOptions, ClassifierRegistry, EyeInput, ForensicReport, StateSeries};
use blinkscan_core::sequence::{EbsqFile, EyeSequence, EBSQ_MAGIC};
use serde_json::json;

use super::{create, output_dir, write_json};
use crate::config::{AnalyzeConfig, RunConfig};
use crate::{CommonArgs, Outcome};

enum Loaded {
    Crops(Vec<EyeSequence>),
    Landmarks(Vec<LandmarkFrame>),
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

/// One JSONL landmark stream, or one or two EBSQ files (left then right).
fn load_inputs(paths: &[PathBuf], fps: f64) -> Result<Loaded> {
    ensure!(!paths.is_empty(), "--input is required");
    let bytes: Vec<Vec<u8>> = paths.iter().map(|p| read(p)).collect::<Result<_>>()?;
    if bytes[0].starts_with(EBSQ_MAGIC) {
        ensure!(paths.len() <= 2, "give at most two crop files, left then right");
        let mut seqs = Vec::new();
        for (k, (b, p)) in bytes.iter().zip(paths).enumerate() {
            let file = EbsqFile::parse(b).with_context(|| format!("reading {}", p.display()))?;
            let eye = match (paths.len(), k) {
                (1, _) => file.labelled_eye(),
                (_, 0) => EyeSide::Left,
                _ => EyeSide::Right,
            };
            seqs.push(file.into_sequence(fps, Some(eye))?);
        }
        Ok(Loaded::Crops(seqs))
    } else {
        ensure!(paths.len() == 1, "give a single landmark stream");
        let frames =
            read_landmarks_jsonl(bytes[0].as_slice()).with_context(|| format!("reading {}", paths[0].display()))?;
        ensure!(!frames.is_empty(), "{} holds no frames", paths[0].display());
        Ok(Loaded::Landmarks(frames))
    }
}

pub fn run(config: &RunConfig, args: &CommonArgs) -> Result<Outcome> {
    let mut cfg: AnalyzeConfig = config.analyze.clone();
    match args.method.as_slice() {
        [] => {}
        [m] => cfg.method = m.clone(),
        _ => bail!("analyze takes one --method"),
    }
    if let Some(fps) = args.fps {
        cfg.fps = fps;
    }
    ensure!(cfg.fps > 0.0 && cfg.fps.is_finite(), "fps must be positive");
    let checkpoint = match args.checkpoint.as_slice() {
        [] => None,
        [p] => Some(ModelCheckpoint::load(p)?),
        _ => bail!("analyze takes one --checkpoint"),
    };
    let out = output_dir(args)?;
    let report = analyze_inputs(&cfg, &args.input, checkpoint, config.seed, &out)?;
    println!(
        "{}: {} blinks in {:.1} s ({:.1}/min), longest gap {:.1} s -> {}",
        report.method,
        report.statistics.blink_count,
        report.statistics.total_duration_s,
        report.statistics.blinks_per_minute,
        report.statistics.max_blinkless_gap_s,
        if report.is_suspect() {
            "SUSPECT"
        } else {
            "authentic-consistent"
        }
    );
    Ok(if report.is_suspect() {
        Outcome::Suspect
    } else {
        Outcome::Authentic
    })
}

/// Classifies, segments and writes `report.json` and `series.csv`.
pub fn analyze_inputs(
    cfg: &AnalyzeConfig,
    inputs: &[PathBuf],
    checkpoint: Option<ModelCheckpoint>,
    seed: u64,
    out: &Path,
) -> Result<ForensicReport> {
    let classifier = ClassifierRegistry::default().build(
        &cfg.method,
        &ClassifierOptions {
            checkpoint,
            ear: cfg.ear,
        },
    )?;
    let loaded = load_inputs(inputs, cfg.fps)?;
    let mut per_eye: Vec<(EyeSide, StateSeries)> = Vec::new();
    let mut timestamps = None;
    match &loaded {
        Loaded::Crops(seqs) => {
            for s in seqs {
                per_eye.push((s.eye, classifier.classify(&EyeInput::crops(s))?));
            }
        }
        Loaded::Landmarks(frames) => {
            for eye in [EyeSide::Left, EyeSide::Right] {
                per_eye.push((eye, classifier.classify(&EyeInput::landmarks(frames, eye))?));
            }
            timestamps = Some(frames.iter().map(|f| f.timestamp_s).collect::<Vec<_>>());
        }
    }
    let mut report = analyze(
        &per_eye,
        cfg.fps,
        &cfg.analysis,
        classifier.model_checksum().map(str::to_string),
    )?;
    report.config = json!({ "seed": seed, "analyze": cfg });
    write_json(&out.join("report.json"), &report)?;
    let series: Vec<StateSeries> = per_eye.into_iter().map(|(_, s)| s).collect();
    let fused = StateSeries::fuse(&series)?;
    write_series_csv(create(&out.join("series.csv"))?, &fused, cfg.fps, timestamps.as_deref())?;
    Ok(report)
}
