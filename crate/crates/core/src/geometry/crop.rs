use serde::{Deserialize, Serialize};

use super::landmarks::{EyeSide, LandmarkFrame, Point};
use super::transform::{estimate_alignment, CanonicalFrame, SimilarityTransform};
use crate::error::{Error, Result};
use crate::image::{dims, sample_bilinear, to_gray};
use crate::sequence::EyeSequence;
use crate::tensor::Tensor;

pub const WIDTH_ENLARGEMENT: f64 = 1.25;
pub const HEIGHT_ENLARGEMENT: f64 = 1.75;
/// Lower bound on each side of a crop box, in pixels.
pub const MIN_BOX_PX: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EyeBox {
    pub center: Point,
    pub width: f64,
    pub height: f64,
    pub eye: Option<EyeSide>,
}

impl EyeBox {
    pub fn left(&self) -> f64 {
        self.center[0] - self.width / 2.0
    }

    pub fn top(&self) -> f64 {
        self.center[1] - self.height / 2.0
    }
}

/// Tight bounding box of the six eye points, enlarged ×1.25 horizontally and
/// ×1.75 vertically about its center, each side floored at [`MIN_BOX_PX`].
pub fn eye_crop_box(eye: &[Point; 6]) -> EyeBox {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in eye {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    EyeBox {
        center: [(x0 + x1) / 2.0, (y0 + y1) / 2.0],
        width: ((x1 - x0) * WIDTH_ENLARGEMENT).max(MIN_BOX_PX),
        height: ((y1 - y0) * HEIGHT_ENLARGEMENT).max(MIN_BOX_PX),
        eye: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropConfig {
    pub out_height: usize,
    pub out_width: usize,
    /// Align each frame onto this frame before cropping; `None` treats the
    /// images as already aligned.
    pub canonical: Option<CanonicalFrame>,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self {
            out_height: 36,
            out_width: 60,
            canonical: Some(CanonicalFrame::default()),
        }
    }
}

/// Samples the eye box of one frame into an `out_height × out_width`
/// grayscale crop. `to_image` maps aligned coordinates back into the image.
/// Returns the crop and whether any sample fell outside the image.
pub fn crop_box(
    image: &Tensor,
    bbox: &EyeBox,
    to_image: &SimilarityTransform,
    out_height: usize,
    out_width: usize,
) -> Result<(Tensor, bool)> {
    let gray = to_gray(image)?;
    let sx = bbox.width / out_width as f64;
    let sy = bbox.height / out_height as f64;
    let mut outside = false;
    let mut data = Vec::with_capacity(out_height * out_width);
    for r in 0..out_height {
        for c in 0..out_width {
            let u = bbox.left() + (c as f64 + 0.5) * sx;
            let v = bbox.top() + (r as f64 + 0.5) * sy;
            let [x, y] = to_image.apply([u, v]);
            let (value, inside) = sample_bilinear(&gray, x, y, 0);
            outside |= !inside;
            data.push(value.clamp(0.0, 1.0));
        }
    }
    Ok((Tensor::new(vec![out_height, out_width, 1], data)?, outside))
}

/// Crops one eye from every frame: align, box the six eye landmarks in
/// aligned coordinates, resample bilinearly to the output size.
pub fn crop_eye_sequence(
    frames: &[LandmarkFrame],
    images: &[Tensor],
    eye: EyeSide,
    fps: f64,
    config: &CropConfig,
) -> Result<EyeSequence> {
    if frames.len() != images.len() {
        return Err(Error::shape(
            "crop_eye_sequence",
            format!("{} landmark frames for {} images", frames.len(), images.len()),
        ));
    }
    if config.out_height == 0 || config.out_width == 0 {
        return Err(Error::InvalidArgument("crop size must be positive".into()));
    }
    let mut crops = Vec::with_capacity(frames.len());
    let mut padded = Vec::new();
    let mut labels = Vec::with_capacity(frames.len());
    for (k, (frame, image)) in frames.iter().zip(images).enumerate() {
        frame.validate()?;
        dims(image)?;
        let align = match &config.canonical {
            Some(c) => estimate_alignment(frame, c)?,
            None => SimilarityTransform::IDENTITY,
        };
        let aligned: [Point; 6] = frame.eye(eye).map(|p| align.apply(p));
        let mut bbox = eye_crop_box(&aligned);
        bbox.eye = Some(eye);
        let (crop, outside) = crop_box(image, &bbox, &align.inverse(), config.out_height, config.out_width)?;
        if outside {
            padded.push(k);
        }
        crops.push(crop);
        labels.push(frame.label(eye));
    }
    let mut seq = EyeSequence::new(crops, fps, eye)?;
    seq.padded_frames = padded;
    if let Some(l) = labels.into_iter().collect::<Option<Vec<u8>>>() {
        if !l.is_empty() {
            seq = seq.with_labels(l)?;
        }
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enlargement_about_center() {
        let eye = [
            [10.0, 22.0],
            [12.0, 20.0],
            [16.0, 20.0],
            [18.0, 22.0],
            [16.0, 24.0],
            [12.0, 24.0],
        ];
        let b = eye_crop_box(&eye);
        assert_eq!(b.center, [14.0, 22.0]);
        assert_eq!(b.width, 10.0);
        assert_eq!(b.height, 7.0);
        let doubled = eye.map(|p| [2.0 * p[0], 2.0 * p[1]]);
        let b2 = eye_crop_box(&doubled);
        assert_eq!(b2.width, 2.0 * b.width);
        assert_eq!(b2.height, 2.0 * b.height);
        assert_eq!(b2.center, [28.0, 44.0]);
    }

    #[test]
    fn flat_eye_is_floored() {
        let eye = [[0.0, 5.0], [2.0, 5.0], [4.0, 5.0], [8.0, 5.0], [4.0, 5.0], [2.0, 5.0]];
        let b = eye_crop_box(&eye);
        assert_eq!(b.height, MIN_BOX_PX);
        assert_eq!(b.width, 10.0);
    }
}
