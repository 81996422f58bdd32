//! Face splicing: a replacement face is aligned, warped back onto the
//! target frame and alpha-blended through a blurred landmark polygon.

pub mod blend;
pub mod mask;
pub mod pnm;
pub mod warp;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use blend::{blend, gaussian_kernel, soft_mask, SpliceResult, SMOOTHING};
pub use mask::{build_mask, convex_hull, PolygonMask};
pub use pnm::{encode_pnm, load_pnm, parse_pnm, save_pnm};
pub use warp::{warp_back, warp_to_patch};

use crate::error::{Error, Result};
use crate::eval::augment::{augment_frame, AugmentConfig, AugmentParams};
use crate::geometry::landmarks::LandmarkFrame;
use crate::geometry::transform::{estimate_alignment, CanonicalFrame};
use crate::image::{dims, to_gray};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpliceConfig {
    /// Side of the square aligned face patch.
    pub patch_size: usize,
    pub blur_sigma: f64,
    /// Brightness and contrast jitter of the replacement; flips are ignored.
    pub color: Option<AugmentConfig>,
}

impl Default for SpliceConfig {
    fn default() -> Self {
        Self {
            patch_size: 256,
            blur_sigma: 2.0,
            color: Some(AugmentConfig {
                flip_probability: 0.0,
                max_brightness: 0.05,
                contrast_range: [0.9, 1.1],
            }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SplicedFrame {
    pub result: SpliceResult,
    /// Target landmarks with the ones under the mask replaced by the
    /// source's, mapped into the target frame.
    pub landmarks: LandmarkFrame,
    pub color: AugmentParams,
}

/// Splices the face of `source` into `target`.
pub fn splice_frame(
    target: &Tensor,
    target_landmarks: &LandmarkFrame,
    source: &Tensor,
    source_landmarks: &LandmarkFrame,
    config: &SpliceConfig,
    seed: u64,
) -> Result<SplicedFrame> {
    if config.patch_size == 0 {
        return Err(Error::InvalidArgument("patch size must be positive".into()));
    }
    let (h, w, c) = dims(target)?;
    let source = match (c, dims(source)?.2) {
        (a, b) if a == b => source.clone(),
        (1, 3) => to_gray(source)?,
        (a, b) => return Err(Error::shape("splice", format!("source has {b} channels, target {a}"))),
    };
    let canonical = CanonicalFrame::with_size(config.patch_size as f64, config.patch_size as f64);
    let to_patch_s = estimate_alignment(source_landmarks, &canonical)?;
    let to_patch_t = estimate_alignment(target_landmarks, &canonical)?;
    let patch = warp_to_patch(&source, &to_patch_s, config.patch_size, config.patch_size)?;
    let color = match &config.color {
        Some(cfg) => AugmentParams {
            flip: false,
            ..cfg.sample(&mut ChaCha8Rng::seed_from_u64(seed))
        },
        None => AugmentParams::IDENTITY,
    };
    let patch = augment_frame(&patch, &color)?;
    let back = to_patch_t.inverse();
    let warped = warp_back(&patch, &back, target)?;
    let mask = build_mask(target_landmarks, w, h)?;
    let mut result = blend(&warped, target, &mask, config.blur_sigma)?;
    result.source_frame = Some(source_landmarks.frame_index);
    result.target_frame = Some(target_landmarks.frame_index);

    let mut landmarks = target_landmarks.clone();
    for (p, &s) in landmarks.points.iter_mut().zip(&source_landmarks.points) {
        if mask.contains(*p) {
            *p = back.apply(to_patch_s.apply(s));
        }
    }
    landmarks.left_label = source_landmarks.left_label;
    landmarks.right_label = source_landmarks.right_label;
    Ok(SplicedFrame {
        result,
        landmarks,
        color,
    })
}
