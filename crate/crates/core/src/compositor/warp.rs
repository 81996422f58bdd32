use crate::error::{Error, Result};
use crate::geometry::transform::SimilarityTransform;
use crate::image::{dims, sample_bilinear};
use crate::tensor::Tensor;

/// Pastes `patch` into `target` through `patch_to_target`. Each target
/// pixel center is mapped back into the patch and sampled bilinearly;
/// pixels whose preimage falls outside the patch keep the target value.
pub fn warp_back(patch: &Tensor, patch_to_target: &SimilarityTransform, target: &Tensor) -> Result<Tensor> {
    let (ph, pw, pc) = dims(patch)?;
    let (h, w, c) = dims(target)?;
    if pc != c {
        return Err(Error::shape("warp", format!("patch has {pc} channels, target {c}")));
    }
    let inv = patch_to_target.inverse();
    let mut out = target.data().to_vec();
    for i in 0..h {
        for j in 0..w {
            let [x, y] = inv.apply([j as f64 + 0.5, i as f64 + 0.5]);
            if !(x >= 0.0 && y >= 0.0 && x <= pw as f64 && y <= ph as f64) {
                continue;
            }
            for ch in 0..c {
                out[(i * w + j) * c + ch] = sample_bilinear(patch, x, y, ch).0;
            }
        }
    }
    Tensor::new(target.shape().to_vec(), out)
}

/// Resamples `image` into a fresh `height × width` canvas through
/// `image_to_patch`; unreached pixels are 0.
pub fn warp_to_patch(
    image: &Tensor,
    image_to_patch: &SimilarityTransform,
    height: usize,
    width: usize,
) -> Result<Tensor> {
    let (_, _, c) = dims(image)?;
    warp_back(image, image_to_patch, &Tensor::zeros(&[height, width, c]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Tensor {
        Tensor::new(
            vec![h, w, 1],
            (0..h * w).map(|k| (k % w + k / w) as f64 / (h + w) as f64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_replaces_target() {
        let p = ramp(8, 10);
        assert_eq!(
            warp_back(&p, &SimilarityTransform::IDENTITY, &Tensor::zeros(&[8, 10, 1])).unwrap(),
            p
        );
    }

    #[test]
    fn small_patch_leaves_rest_untouched() {
        let target = ramp(20, 20);
        let patch = Tensor::filled(&[4, 4, 1], 0.25);
        let t = SimilarityTransform::new(1.0, 0.0, [5.0, 5.0]).unwrap();
        let out = warp_back(&patch, &t, &target).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                let v = out.data()[i * 20 + j];
                if (5..9).contains(&i) && (5..9).contains(&j) {
                    assert_eq!(v, 0.25);
                } else if !(4..10).contains(&i) || !(4..10).contains(&j) {
                    assert_eq!(v, target.data()[i * 20 + j]);
                }
            }
        }
    }
}
