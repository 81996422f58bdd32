use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use blinkscan_core::compositor::{load_pnm, save_pnm, splice_frame, PolygonMask};
use blinkscan_core::eval::AugmentParams;
use blinkscan_core::geometry::crop_eye_sequence;
use blinkscan_core::geometry::landmarks::{load_landmarks, save_landmarks, EyeSide, LandmarkFrame};
use blinkscan_core::Tensor;
use serde::Serialize;
use serde_json::json;

use super::{output_dir, write_json};
use crate::config::{CompositeConfig, RunConfig, OUTPUT_FORMAT_VERSION};
use crate::{CommonArgs, Outcome};

/// A directory with `landmarks.jsonl` and `frames/*.pgm|ppm`, one image per
/// landmark record, in file-name order.
pub struct FrameDir {
    pub images: Vec<Tensor>,
    pub landmarks: Vec<LandmarkFrame>,
}

impl FrameDir {
    pub fn load(dir: &Path) -> Result<Self> {
        let lm_path = dir.join("landmarks.jsonl");
        ensure!(lm_path.is_file(), "missing landmarks: {} not found", lm_path.display());
        let landmarks = load_landmarks(&lm_path)?;
        let frames_dir = dir.join("frames");
        let mut paths: Vec<PathBuf> = fs::read_dir(&frames_dir)
            .with_context(|| format!("listing {}", frames_dir.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        paths.retain(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm")));
        paths.sort();
        if paths.len() != landmarks.len() {
            bail!(
                "missing landmarks: {} images in {} but {} landmark records",
                paths.len(),
                frames_dir.display(),
                landmarks.len()
            );
        }
        let images = paths.iter().map(load_pnm).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { images, landmarks })
    }
}

#[derive(Serialize)]
struct FrameMeta {
    frame: usize,
    source_frame: Option<u64>,
    target_frame: Option<u64>,
    mask: PolygonMask,
    mask_area_px: usize,
}

pub fn run(config: &RunConfig, args: &CommonArgs) -> Result<Outcome> {
    let (target_dir, source_dir) = match args.input.as_slice() {
        [t, s] => (t, s),
        _ => bail!("composite takes two --input directories: target first, then source"),
    };
    let mut cfg: CompositeConfig = config.composite.clone();
    if let Some(fps) = args.fps {
        cfg.fps = fps;
    }
    let out = output_dir(args)?;
    let target = FrameDir::load(target_dir)?;
    let source = FrameDir::load(source_dir)?;
    let k = cfg.source_frame;
    ensure!(
        k < source.images.len(),
        "source frame {k} beyond the {} source frames",
        source.images.len()
    );
    let frames_out = out.join("frames");
    fs::create_dir_all(&frames_out).with_context(|| format!("creating {}", frames_out.display()))?;

    let mut images = Vec::with_capacity(target.images.len());
    let mut landmarks = Vec::with_capacity(target.images.len());
    let mut meta = Vec::with_capacity(target.images.len());
    let mut color = AugmentParams::IDENTITY;
    for (t, (img, lm)) in target.images.iter().zip(&target.landmarks).enumerate() {
        let s = splice_frame(
            img,
            lm,
            &source.images[k],
            &source.landmarks[k],
            &cfg.splice,
            config.seed,
        )?;
        save_pnm(
            frames_out.join(format!("{t:06}.{}", if img.shape()[2] == 3 { "ppm" } else { "pgm" })),
            &s.result.image,
        )?;
        color = s.color;
        landmarks.push(s.landmarks);
        meta.push(FrameMeta {
            frame: t,
            source_frame: s.result.source_frame,
            target_frame: s.result.target_frame,
            mask_area_px: s.result.mask.area(),
            mask: s.result.mask,
        });
        images.push(s.result.image);
    }
    save_landmarks(out.join("landmarks.jsonl"), &landmarks)?;
    for (eye, name) in [(EyeSide::Left, "left.ebsq"), (EyeSide::Right, "right.ebsq")] {
        crop_eye_sequence(&landmarks, &images, eye, cfg.fps, &cfg.crop)?.save(out.join(name))?;
    }
    write_json(
        &out.join("composite.json"),
        &json!({
            "format_version": OUTPUT_FORMAT_VERSION,
            "config": { "seed": config.seed, "composite": &cfg },
            "blur_sigma": cfg.splice.blur_sigma,
            "smoothing": blinkscan_core::compositor::SMOOTHING,
            "color": color,
            "frames": meta,
        }),
    )?;
    println!("spliced {} frames into {}", images.len(), out.display());
    Ok(Outcome::Done)
}
