use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use blinkscan_core::compositor::save_pnm;
use blinkscan_core::eval::dataset::{ClipEntry, FrameSetEntry, Manifest, Split, VideoEntry, MANIFEST_FORMAT_VERSION};
use blinkscan_core::eval::synth::{blink_track, make_frame_set, make_video, render_face_video, stream_rng};
use blinkscan_core::geometry::landmarks::{save_landmarks, EyeSide};
use serde_json::json;

use super::{output_dir, write_json};
use crate::config::{RunConfig, SynthConfig};
use crate::{CommonArgs, Outcome};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Collects paths relative to the output root as files are written.
struct Writer {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn path(&mut self, rel: impl AsRef<Path>) -> Result<PathBuf> {
        let rel = rel.as_ref().to_path_buf();
        let full = self.root.join(&rel);
        if let Some(dir) = full.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        self.files.push(rel);
        Ok(full)
    }
}

fn split_counts(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| total / parts + usize::from(i < total % parts))
        .collect()
}

pub fn run(config: &RunConfig, args: &CommonArgs) -> Result<Outcome> {
    let root = output_dir(args)?;
    let manifest = synthesize(&config.synth, config.seed, &root)?;
    println!(
        "wrote {} videos, {} clips, {} files to {}",
        manifest.videos.len(),
        manifest.clips.len(),
        manifest.files.len(),
        root.display()
    );
    Ok(Outcome::Done)
}

/// Writes the dataset under `root` and returns its manifest.
pub fn synthesize(cfg: &SynthConfig, seed: u64, root: &Path) -> Result<Manifest> {
    ensure!(
        cfg.train_videos > 0 && cfg.test_videos > 0,
        "need at least one train and one test video"
    );
    let bench = &cfg.benchmark;
    let fps = bench.episode.fps;
    let mut w = Writer {
        root: root.to_path_buf(),
        files: Vec::new(),
    };

    let mut frame_sets = Vec::new();
    for (split, count, stream) in [
        (Split::Train, bench.train_frames, 1),
        (Split::Test, bench.test_frames, 2),
    ] {
        let set = make_frame_set(&mut stream_rng(seed, stream), count, &bench.render)?;
        let rel = PathBuf::from(format!("frames_{}.ebsq", split_name(split)));
        set.to_sequence()?.save(w.path(&rel)?)?;
        frame_sets.push(FrameSetEntry {
            split,
            path: rel,
            count,
        });
    }

    let mut videos = Vec::new();
    for (split, sequences, n_videos, stream) in [
        (Split::Train, bench.train_sequences, cfg.train_videos, 3),
        (Split::Test, bench.test_sequences, cfg.test_videos, 4),
    ] {
        let mut rng = stream_rng(seed, stream);
        for (i, episodes) in split_counts(sequences, n_videos).into_iter().enumerate() {
            if episodes == 0 {
                continue;
            }
            let id = format!("{}_{i:03}", split_name(split));
            let v = make_video(&mut rng, episodes, bench)?;
            let crops = PathBuf::from(format!("videos/{id}.ebsq"));
            let landmarks = PathBuf::from(format!("videos/{id}.jsonl"));
            v.crops.save(w.path(&crops)?)?;
            save_landmarks(w.path(&landmarks)?, &v.video.landmarks)?;
            videos.push(VideoEntry {
                id,
                split,
                crops,
                landmarks,
                fps,
                eye: EyeSide::Left,
                frames: v.crops.len(),
                episodes: v.episodes,
                ambiguous_frames: v
                    .ambiguous
                    .iter()
                    .enumerate()
                    .filter(|(_, &a)| a)
                    .map(|(t, _)| t)
                    .collect(),
            });
        }
    }

    let mut clips = Vec::new();
    for (k, spec) in cfg.clips.iter().enumerate() {
        ensure!(
            !spec.name.is_empty()
                && spec
                    .name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'),
            "clip name `{}` must be non-empty ASCII letters, digits, `_` or `-`",
            spec.name
        );
        let mut rng = stream_rng(seed, 10 + k as u64);
        let n = (spec.seconds * fps).round() as usize;
        ensure!(n > 0, "clip `{}` has no frames", spec.name);
        let (apertures, labels) = blink_track(
            &mut rng,
            n,
            fps,
            spec.blink_interval_s,
            spec.blink_frames,
            &bench.episode,
        );
        let blinks = labels.windows(2).filter(|p| p == &[0, 1]).count() + usize::from(labels[0] == 1);
        let video = render_face_video(&apertures, Some(&labels), fps, &bench.render, &mut rng)?;
        let dir = PathBuf::from(format!("clips/{}", spec.name));
        for (t, img) in video.images.iter().enumerate() {
            save_pnm(w.path(dir.join(format!("frames/{t:06}.pgm")))?, img)?;
        }
        let entry = ClipEntry {
            name: spec.name.clone(),
            fps,
            frames: n,
            images: dir.join("frames"),
            landmarks: dir.join("landmarks.jsonl"),
            left_crops: dir.join("left.ebsq"),
            right_crops: dir.join("right.ebsq"),
            blinks,
        };
        save_landmarks(w.path(&entry.landmarks)?, &video.landmarks)?;
        video
            .crops(EyeSide::Left, &bench.render)?
            .save(w.path(&entry.left_crops)?)?;
        video
            .crops(EyeSide::Right, &bench.render)?
            .save(w.path(&entry.right_crops)?)?;
        clips.push(entry);
    }

    w.files.push(MANIFEST_FILE.into());
    let manifest = Manifest {
        format_version: MANIFEST_FORMAT_VERSION,
        seed,
        frame_sets,
        videos,
        clips,
        files: w.files,
        config: json!({ "seed": seed, "synth": cfg }),
    };
    write_json(&root.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Test => "test",
    }
}
