use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::dims;
use crate::sequence::EyeSequence;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub flip: bool,
    /// Added to every pixel.
    pub brightness: f64,
    /// Scale about 0.5.
    pub contrast: f64,
}

impl AugmentParams {
    pub const IDENTITY: Self = Self {
        flip: false,
        brightness: 0.0,
        contrast: 1.0,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub flip_probability: f64,
    pub max_brightness: f64,
    pub contrast_range: [f64; 2],
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip_probability: 0.5,
            max_brightness: 0.1,
            contrast_range: [0.8, 1.2],
        }
    }
}

impl AugmentConfig {
    pub fn sample(&self, rng: &mut impl Rng) -> AugmentParams {
        let [c0, c1] = self.contrast_range;
        AugmentParams {
            flip: rng.gen_bool(self.flip_probability.clamp(0.0, 1.0)),
            brightness: if self.max_brightness > 0.0 {
                rng.gen_range(-self.max_brightness..=self.max_brightness)
            } else {
                0.0
            },
            contrast: if c1 > c0 { rng.gen_range(c0..=c1) } else { c0 },
        }
    }
}

/// Mirror columns, add brightness and clamp, then scale about 0.5 and clamp.
pub fn augment_frame(image: &Tensor, params: &AugmentParams) -> Result<Tensor> {
    let (h, w, c) = dims(image)?;
    let src = image.data();
    let mut out = Vec::with_capacity(src.len());
    for i in 0..h {
        for j in 0..w {
            let sj = if params.flip { w - 1 - j } else { j };
            for ch in 0..c {
                let v = (src[(i * w + sj) * c + ch] + params.brightness).clamp(0.0, 1.0);
                out.push((0.5 + params.contrast * (v - 0.5)).clamp(0.0, 1.0));
            }
        }
    }
    Tensor::new(image.shape().to_vec(), out)
}

/// One parameter draw for the whole sequence; labels and length untouched.
pub fn augment_sequence(seq: &EyeSequence, seed: u64, config: &AugmentConfig) -> Result<(EyeSequence, AugmentParams)> {
    let params = config.sample(&mut ChaCha8Rng::seed_from_u64(seed));
    let frames = seq
        .frames
        .iter()
        .map(|f| augment_frame(f, &params))
        .collect::<Result<Vec<_>>>()?;
    Ok((EyeSequence { frames, ..seq.clone() }, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img() -> Tensor {
        Tensor::new(vec![2, 3, 1], vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]).unwrap()
    }

    #[test]
    fn flip_is_an_involution() {
        let p = AugmentParams {
            flip: true,
            ..AugmentParams::IDENTITY
        };
        let once = augment_frame(&img(), &p).unwrap();
        assert_eq!(once.data(), &[0.4, 0.2, 0.0, 1.0, 0.8, 0.6]);
        assert_eq!(augment_frame(&once, &p).unwrap(), img());
        assert_eq!(augment_frame(&img(), &AugmentParams::IDENTITY).unwrap(), img());
    }

    #[test]
    fn contrast_pivots_on_half() {
        let grey = Tensor::filled(&[3, 3, 1], 0.5);
        for contrast in [0.0, 0.3, 1.7, 5.0] {
            let p = AugmentParams {
                contrast,
                ..AugmentParams::IDENTITY
            };
            assert_eq!(augment_frame(&grey, &p).unwrap(), grey);
        }
        let p = AugmentParams {
            brightness: 0.5,
            contrast: 2.0,
            flip: false,
        };
        assert!(augment_frame(&img(), &p)
            .unwrap()
            .data()
            .iter()
            .all(|v| (0.0..=1.0).contains(v)));
    }
}
