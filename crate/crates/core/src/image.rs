//! Helpers for `[H, W, C]` image tensors with values in `[0, 1]`.
//!
//! Continuous coordinates put pixel `(i, j)` over `[j, j+1) × [i, i+1)`,
//! its value at the center `(j + 0.5, i + 0.5)`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn dims(img: &Tensor) -> Result<(usize, usize, usize)> {
    match *img.shape() {
        [h, w, c] => Ok((h, w, c)),
        [h, w] => Ok((h, w, 1)),
        _ => Err(Error::shape(
            "image",
            format!("expected [H, W, C], got {:?}", img.shape()),
        )),
    }
}

/// Bilinear sample of channel `ch` at continuous position `(x, y)`; outside
/// the image the nearest edge pixel is replicated. The flag reports whether
/// the position lay inside the image.
pub fn sample_bilinear(img: &Tensor, x: f64, y: f64, ch: usize) -> (f64, bool) {
    let (h, w, c) = dims(img).expect("image tensor");
    let inside = x >= 0.0 && y >= 0.0 && x <= w as f64 && y <= h as f64;
    let fx = (x - 0.5).clamp(0.0, (w - 1) as f64);
    let fy = (y - 0.5).clamp(0.0, (h - 1) as f64);
    let x0 = fx.floor() as usize;
    let y0 = fy.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let ax = fx - x0 as f64;
    let ay = fy - y0 as f64;
    let d = img.data();
    let px = |yy: usize, xx: usize| d[(yy * w + xx) * c + ch];
    let top = px(y0, x0) * (1.0 - ax) + px(y0, x1) * ax;
    let bottom = px(y1, x0) * (1.0 - ax) + px(y1, x1) * ax;
    (top * (1.0 - ay) + bottom * ay, inside)
}

/// Luminance of an RGB image (ITU-R BT.601 weights); single-channel images
/// pass through.
pub fn to_gray(img: &Tensor) -> Result<Tensor> {
    let (h, w, c) = dims(img)?;
    match c {
        1 => img.clone().reshape(&[h, w, 1]),
        3 => {
            let d = img.data();
            let g = (0..h * w)
                .map(|k| 0.299 * d[3 * k] + 0.587 * d[3 * k + 1] + 0.114 * d[3 * k + 2])
                .collect();
            Tensor::new(vec![h, w, 1], g)
        }
        _ => Err(Error::shape("image", format!("unsupported channel count {c}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_centers_sample_exactly() {
        let img = Tensor::new(vec![2, 3, 1], vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert_eq!(sample_bilinear(&img, 1.5, 1.5, 0), (0.4, true));
        let (mid, _) = sample_bilinear(&img, 1.0, 0.5, 0);
        assert!((mid - 0.05).abs() < 1e-15);
        assert_eq!(sample_bilinear(&img, -4.0, 0.5, 0), (0.0, false));
    }
}
