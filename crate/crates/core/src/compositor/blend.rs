use serde::Serialize;

use super::mask::PolygonMask;
use crate::error::{Error, Result};
use crate::image::dims;
use crate::tensor::Tensor;

/// Radially truncated 2D Gaussian: weights for offsets with
/// `dx² + dy² ≤ (3σ)²`, normalized to sum 1. Returned row-major over the
/// `(2r+1)²` square with `r = floor(3σ)`. σ = 0 gives the unit impulse.
pub fn gaussian_kernel(sigma: f64) -> Result<(usize, Vec<f64>)> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("blur sigma must be ≥ 0, got {sigma}")));
    }
    let r = (3.0 * sigma).floor() as usize;
    if r == 0 {
        return Ok((0, vec![1.0]));
    }
    let n = 2 * r + 1;
    let cutoff = (3.0 * sigma).powi(2);
    let mut w = vec![0.0; n * n];
    for dy in 0..n {
        for dx in 0..n {
            let (x, y) = (dx as f64 - r as f64, dy as f64 - r as f64);
            let d2 = x * x + y * y;
            if d2 <= cutoff {
                w[dy * n + dx] = (-d2 / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok((r, w))
}

/// Blurred mask in `[0, 1]`, edges replicated. Pixels whose kernel window
/// is uniform are copied without convolving.
pub fn soft_mask(mask: &PolygonMask, sigma: f64) -> Result<Vec<f64>> {
    let (r, kernel) = gaussian_kernel(sigma)?;
    let (w, h) = (mask.width, mask.height);
    let raster: Vec<f64> = mask.raster.iter().map(|&v| v as f64).collect();
    if r == 0 {
        return Ok(raster);
    }
    // Summed-area table for the uniform-window shortcut.
    let mut sat = vec![0u32; (w + 1) * (h + 1)];
    for i in 0..h {
        for j in 0..w {
            sat[(i + 1) * (w + 1) + j + 1] =
                mask.raster[i * w + j] as u32 + sat[i * (w + 1) + j + 1] + sat[(i + 1) * (w + 1) + j]
                    - sat[i * (w + 1) + j];
        }
    }
    let window_sum = |i0: usize, i1: usize, j0: usize, j1: usize| {
        sat[(i1 + 1) * (w + 1) + j1 + 1] + sat[i0 * (w + 1) + j0]
            - sat[i0 * (w + 1) + j1 + 1]
            - sat[(i1 + 1) * (w + 1) + j0]
    };
    let n = 2 * r + 1;
    let mut out = vec![0.0; w * h];
    for i in 0..h {
        for j in 0..w {
            let (i0, i1) = (i.saturating_sub(r), (i + r).min(h - 1));
            let (j0, j1) = (j.saturating_sub(r), (j + r).min(w - 1));
            let s = window_sum(i0, i1, j0, j1);
            if s == 0 {
                continue;
            }
            if s as usize == (i1 - i0 + 1) * (j1 - j0 + 1) {
                out[i * w + j] = 1.0;
                continue;
            }
            let mut acc = 0.0;
            for dy in 0..n {
                let ii = (i as isize + dy as isize - r as isize).clamp(0, h as isize - 1) as usize;
                for dx in 0..n {
                    let k = kernel[dy * n + dx];
                    if k == 0.0 {
                        continue;
                    }
                    let jj = (j as isize + dx as isize - r as isize).clamp(0, w as isize - 1) as usize;
                    acc += k * raster[ii * w + jj];
                }
            }
            out[i * w + j] = acc.clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

pub const SMOOTHING: &str = "mask-blur";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpliceResult {
    #[serde(skip)]
    pub image: Tensor,
    pub mask: PolygonMask,
    #[serde(skip)]
    pub soft_mask: Vec<f64>,
    pub blur_sigma: f64,
    /// What the blur was applied to.
    pub smoothing: String,
    pub source_frame: Option<u64>,
    pub target_frame: Option<u64>,
}

/// `target + soft · (warped − target)`, i.e. alpha compositing with the Gaussian-blurred mask.
pub fn blend(warped: &Tensor, target: &Tensor, mask: &PolygonMask, blur_sigma: f64) -> Result<SpliceResult> {
    let (h, w, c) = dims(target)?;
    if warped.shape() != target.shape() {
        return Err(Error::shape(
            "blend",
            format!("warped {:?} vs target {:?}", warped.shape(), target.shape()),
        ));
    }
    if (mask.height, mask.width) != (h, w) {
        return Err(Error::shape(
            "blend",
            format!("mask {}x{} vs image {h}x{w}", mask.height, mask.width),
        ));
    }
    let soft = soft_mask(mask, blur_sigma)?;
    let (a, b) = (warped.data(), target.data());
    let mut data = Vec::with_capacity(b.len());
    for k in 0..h * w {
        let s = soft[k];
        for ch in 0..c {
            let idx = k * c + ch;
            data.push(if s == 0.0 {
                b[idx]
            } else if s == 1.0 {
                a[idx]
            } else {
                b[idx] + s * (a[idx] - b[idx])
            });
        }
    }
    Ok(SpliceResult {
        image: Tensor::new(target.shape().to_vec(), data)?,
        mask: mask.clone(),
        soft_mask: soft,
        blur_sigma,
        smoothing: SMOOTHING.into(),
        source_frame: None,
        target_frame: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_normalized() {
        for sigma in [0.0, 0.3, 1.0, 2.5] {
            let (_, k) = gaussian_kernel(sigma).unwrap();
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(gaussian_kernel(-1.0).is_err());
    }

    #[test]
    fn full_mask_blurs_to_one() {
        let m = PolygonMask::from_points(&[[-1.0, -1.0], [20.0, -1.0], [20.0, 20.0], [-1.0, 20.0]], 16, 16).unwrap();
        assert!(soft_mask(&m, 2.0).unwrap().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn identical_inputs_blend_to_target() {
        let t = Tensor::new(vec![4, 4, 1], (0..16).map(|v| v as f64 / 16.0).collect()).unwrap();
        let m = PolygonMask::from_points(&[[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]], 4, 4).unwrap();
        assert_eq!(blend(&t, &t, &m, 1.0).unwrap().image, t);
    }
}
