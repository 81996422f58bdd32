//! Synthetic eye-state datasets.
//!
//! Ground truth follows the aperture: `a < 0.5` is closed. The exception
//! is the ambiguous frame: inside a run of constant state (never at a
//! transition) a frame may be rendered half-closed, `a` drawn from
//! [`AmbiguityConfig::aperture`], and keeps the label of its run. Its
//! state can only be read from the frames around it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::LabeledFrameSet;
use super::render::{render_face, FaceGeometry, FacePose, FaceStyle};
use crate::error::{Error, Result};
use crate::geometry::crop::{crop_eye_sequence, CropConfig};
use crate::geometry::landmarks::{EyeSide, LandmarkFrame};
use crate::geometry::transform::CanonicalFrame;
use crate::nn::model::{CLOSED, OPEN};
use crate::sequence::EyeSequence;
use crate::tensor::Tensor;

pub const CLOSED_BELOW: f64 = 0.5;

pub fn label_for_aperture(a: f64) -> u8 {
    if a < CLOSED_BELOW {
        CLOSED as u8
    } else {
        OPEN as u8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub image_size: usize,
    pub geometry: FaceGeometry,
    pub noise_sigma: f64,
    /// Per-frame head jitter, pixels.
    pub jitter_px: f64,
    pub crop_height: usize,
    pub crop_width: usize,
    pub canonical: CanonicalFrame,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            image_size: 96,
            geometry: FaceGeometry::default(),
            noise_sigma: 0.02,
            jitter_px: 0.3,
            crop_height: 36,
            crop_width: 60,
            canonical: CanonicalFrame::default(),
        }
    }
}

impl RenderConfig {
    pub fn crop(&self) -> CropConfig {
        CropConfig {
            out_height: self.crop_height,
            out_width: self.crop_width,
            canonical: Some(self.canonical),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmbiguityConfig {
    /// Chance that a non-initial frame of a closed run is ambiguous.
    pub closed_probability: f64,
    /// Same for open runs.
    pub open_probability: f64,
    pub aperture: [f64; 2],
}

impl Default for AmbiguityConfig {
    fn default() -> Self {
        Self {
            closed_probability: 0.6,
            open_probability: 0.2,
            aperture: [0.40, 0.48],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub min_len: usize,
    pub max_len: usize,
    /// Frames of an initial open run, inclusive range.
    pub lead_in: [usize; 2],
    pub closed_run: [usize; 2],
    pub open_run: [usize; 2],
    pub open_aperture: [f64; 2],
    pub closed_aperture: [f64; 2],
    pub fps: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            min_len: 10,
            max_len: 20,
            lead_in: [1, 5],
            closed_run: [2, 6],
            open_run: [2, 6],
            open_aperture: [0.7, 1.0],
            closed_aperture: [0.0, 0.25],
            fps: 25.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub train_frames: usize,
    pub test_frames: usize,
    pub train_sequences: usize,
    pub test_sequences: usize,
    pub render: RenderConfig,
    pub episode: EpisodeConfig,
    pub ambiguity: AmbiguityConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            train_frames: 1600,
            test_frames: 400,
            train_sequences: 300,
            test_sequences: 200,
            render: RenderConfig::default(),
            episode: EpisodeConfig::default(),
            ambiguity: AmbiguityConfig::default(),
        }
    }
}

/// A rendered face clip: per-frame images, landmarks and eye apertures.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceVideo {
    pub images: Vec<Tensor>,
    pub landmarks: Vec<LandmarkFrame>,
    pub apertures: Vec<[f64; 2]>,
    pub fps: f64,
}

impl FaceVideo {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn crops(&self, eye: EyeSide, render: &RenderConfig) -> Result<EyeSequence> {
        crop_eye_sequence(&self.landmarks, &self.images, eye, self.fps, &render.crop())
    }
}

/// Renders one subject under one pose, frame by frame.
pub fn render_face_video(
    apertures: &[[f64; 2]],
    labels: Option<&[u8]>,
    fps: f64,
    render: &RenderConfig,
    rng: &mut impl Rng,
) -> Result<FaceVideo> {
    if let Some(l) = labels {
        if l.len() != apertures.len() {
            return Err(Error::shape(
                "face video",
                format!("{} labels for {} frames", l.len(), apertures.len()),
            ));
        }
    }
    let style = FaceStyle::sample(rng);
    let pose = FacePose::sample(rng, render.image_size);
    let mut images = Vec::with_capacity(apertures.len());
    let mut landmarks = Vec::with_capacity(apertures.len());
    for (t, &a) in apertures.iter().enumerate() {
        let j = render.jitter_px;
        let frame_pose = if j > 0.0 {
            pose.shifted(rng.gen_range(-j..=j), rng.gen_range(-j..=j))
        } else {
            pose
        };
        let (img, points) = render_face(
            render.image_size,
            &render.geometry,
            &style,
            &frame_pose,
            a,
            render.noise_sigma,
            rng,
        )?;
        let label = labels.map(|l| l[t]);
        images.push(img);
        landmarks.push(LandmarkFrame {
            frame_index: t as u64,
            timestamp_s: t as f64 / fps,
            points,
            left_label: label,
            right_label: label,
        });
    }
    Ok(FaceVideo {
        images,
        landmarks,
        apertures: apertures.to_vec(),
        fps,
    })
}

/// One labelled clip: left-eye crops with labels, the landmarks of both
/// eyes, and which frames were rendered ambiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticEpisode {
    pub crops: EyeSequence,
    pub landmarks: Vec<LandmarkFrame>,
    pub ambiguous: Vec<bool>,
}

impl SyntheticEpisode {
    pub fn labels(&self) -> &[u8] {
        self.crops.labels.as_deref().unwrap_or(&[])
    }
}

fn range_usize(rng: &mut impl Rng, r: [usize; 2]) -> usize {
    rng.gen_range(r[0]..=r[1].max(r[0]))
}

fn range_f64(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.gen_range(r[0]..r[1])
    } else {
        r[0]
    }
}

/// Open lead-in, then alternating closed and open runs, cut to a length in
/// `[min_len, max_len]`. Always contains an open→closed transition.
pub fn episode_labels(rng: &mut impl Rng, cfg: &EpisodeConfig) -> Vec<u8> {
    let len = range_usize(rng, [cfg.min_len, cfg.max_len]).max(2);
    let lead = range_usize(rng, cfg.lead_in).clamp(1, len - 1);
    let mut labels = vec![OPEN as u8; lead];
    let mut closed = true;
    while labels.len() < len {
        let run = range_usize(rng, if closed { cfg.closed_run } else { cfg.open_run }).max(1);
        let state = if closed { CLOSED } else { OPEN } as u8;
        labels.extend(std::iter::repeat_n(state, run.min(len - labels.len())));
        closed = !closed;
    }
    labels
}

/// Apertures for a label track; returns the per-frame apertures of both
/// eyes and the ambiguity flags.
pub fn episode_apertures(
    rng: &mut impl Rng,
    labels: &[u8],
    episode: &EpisodeConfig,
    ambiguity: &AmbiguityConfig,
) -> (Vec<[f64; 2]>, Vec<bool>) {
    let mut out = Vec::with_capacity(labels.len());
    let mut amb = Vec::with_capacity(labels.len());
    for (t, &l) in labels.iter().enumerate() {
        let p = if l == CLOSED as u8 {
            ambiguity.closed_probability
        } else {
            ambiguity.open_probability
        };
        let ambiguous = t > 0 && labels[t - 1] == l && rng.gen_bool(p.clamp(0.0, 1.0));
        let range = if ambiguous {
            ambiguity.aperture
        } else if l == CLOSED as u8 {
            episode.closed_aperture
        } else {
            episode.open_aperture
        };
        out.push([range_f64(rng, range), range_f64(rng, range)]);
        amb.push(ambiguous);
    }
    (out, amb)
}

pub fn make_episode(rng: &mut impl Rng, cfg: &BenchmarkConfig) -> Result<SyntheticEpisode> {
    let labels = episode_labels(rng, &cfg.episode);
    let (apertures, ambiguous) = episode_apertures(rng, &labels, &cfg.episode, &cfg.ambiguity);
    let video = render_face_video(&apertures, Some(&labels), cfg.episode.fps, &cfg.render, rng)?;
    let crops = video.crops(EyeSide::Left, &cfg.render)?;
    Ok(SyntheticEpisode {
        crops,
        landmarks: video.landmarks,
        ambiguous,
    })
}

/// Single frames with both eyes at independent uniform apertures; each eye
/// becomes one labelled crop.
pub fn make_frame_set(rng: &mut impl Rng, count: usize, render: &RenderConfig) -> Result<LabeledFrameSet> {
    let mut set = LabeledFrameSet::default();
    while set.len() < count {
        let a = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let video = render_face_video(&[a], None, 25.0, render, rng)?;
        for (k, eye) in [EyeSide::Left, EyeSide::Right].into_iter().enumerate() {
            if set.len() == count {
                break;
            }
            let crop = video.crops(eye, render)?;
            set.push(
                crop.frames[0].clone(),
                label_for_aperture(a[k]),
                format!("synthetic:{}:a={:.4}", eye.as_str(), a[k]),
            )?;
        }
    }
    Ok(set)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Benchmarks {
    pub train_frames: LabeledFrameSet,
    pub test_frames: LabeledFrameSet,
    pub train: Vec<SyntheticEpisode>,
    /// Held-out temporal-ambiguity sequences.
    pub test: Vec<SyntheticEpisode>,
}

/// Independent generator number `k` derived from `seed`.
pub fn stream_rng(seed: u64, k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k))
}

/// Every part draws from its own stream derived from `seed`, so changing
/// one count leaves the others unchanged.
pub fn make_synthetic_benchmarks(seed: u64, cfg: &BenchmarkConfig) -> Result<Benchmarks> {
    let stream = |k: u64| stream_rng(seed, k);
    let episodes = |rng: &mut ChaCha8Rng, n: usize| (0..n).map(|_| make_episode(rng, cfg)).collect::<Result<Vec<_>>>();
    Ok(Benchmarks {
        train_frames: make_frame_set(&mut stream(1), cfg.train_frames, &cfg.render)?,
        test_frames: make_frame_set(&mut stream(2), cfg.test_frames, &cfg.render)?,
        train: episodes(&mut stream(3), cfg.train_sequences)?,
        test: episodes(&mut stream(4), cfg.test_sequences)?,
    })
}

/// Several episodes rendered back to back as one subject.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticVideo {
    pub video: FaceVideo,
    /// Labelled left-eye crops.
    pub crops: EyeSequence,
    /// Half-open frame range of each episode.
    pub episodes: Vec<[usize; 2]>,
    pub ambiguous: Vec<bool>,
}

pub fn make_video(rng: &mut impl Rng, episodes: usize, cfg: &BenchmarkConfig) -> Result<SyntheticVideo> {
    let (mut labels, mut apertures, mut ambiguous, mut ranges) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..episodes {
        let l = episode_labels(rng, &cfg.episode);
        let (a, amb) = episode_apertures(rng, &l, &cfg.episode, &cfg.ambiguity);
        ranges.push([labels.len(), labels.len() + l.len()]);
        labels.extend(l);
        apertures.extend(a);
        ambiguous.extend(amb);
    }
    let video = render_face_video(&apertures, Some(&labels), cfg.episode.fps, &cfg.render, rng)?;
    let crops = video.crops(EyeSide::Left, &cfg.render)?;
    Ok(SyntheticVideo {
        video,
        crops,
        episodes: ranges,
        ambiguous,
    })
}

/// Adds independent Gaussian noise of `sigma_px` to every coordinate.
pub fn perturb_landmarks(frames: &[LandmarkFrame], sigma_px: f64, rng: &mut impl Rng) -> Result<Vec<LandmarkFrame>> {
    let normal =
        Normal::new(0.0, sigma_px).map_err(|_| Error::InvalidArgument(format!("landmark noise sigma {sigma_px}")))?;
    Ok(frames
        .iter()
        .map(|f| {
            let mut f = f.clone();
            for p in &mut f.points {
                p[0] += normal.sample(rng);
                p[1] += normal.sample(rng);
            }
            f
        })
        .collect())
}

/// Natural blinking: open-eye intervals drawn from `interval_s`, blinks of
/// `blink_frames` closed frames. An empty interval range gives a blink-free
/// clip. Returns apertures and labels.
pub fn blink_track(
    rng: &mut impl Rng,
    frames: usize,
    fps: f64,
    interval_s: Option<[f64; 2]>,
    blink_frames: [usize; 2],
    episode: &EpisodeConfig,
) -> (Vec<[f64; 2]>, Vec<u8>) {
    let mut labels = vec![OPEN as u8; frames];
    if let Some(iv) = interval_s {
        let mut t = (range_f64(rng, iv) * fps) as usize;
        while t < frames {
            let run = range_usize(rng, blink_frames);
            for l in labels.iter_mut().skip(t).take(run) {
                *l = CLOSED as u8;
            }
            t += run + ((range_f64(rng, iv) * fps) as usize).max(1);
        }
    }
    let apertures = labels
        .iter()
        .map(|&l| {
            let r = if l == CLOSED as u8 {
                episode.closed_aperture
            } else {
                episode.open_aperture
            };
            let a = range_f64(rng, r);
            [a, a]
        })
        .collect();
    (apertures, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_have_a_blink_and_bounded_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = EpisodeConfig::default();
        for _ in 0..500 {
            let l = episode_labels(&mut rng, &cfg);
            assert!((10..=20).contains(&l.len()));
            assert_eq!(l[0], 0);
            assert!(l.windows(2).any(|w| w == [0, 1]));
        }
    }

    #[test]
    fn ambiguity_never_at_transitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = EpisodeConfig::default();
        let amb = AmbiguityConfig {
            closed_probability: 1.0,
            open_probability: 1.0,
            ..Default::default()
        };
        for _ in 0..100 {
            let l = episode_labels(&mut rng, &cfg);
            let (a, flags) = episode_apertures(&mut rng, &l, &cfg, &amb);
            for t in 0..l.len() {
                let transition = t == 0 || l[t] != l[t - 1];
                assert_eq!(flags[t], !transition);
                if !flags[t] {
                    assert_eq!(label_for_aperture(a[t][0]), l[t]);
                }
            }
        }
    }

    #[test]
    fn blink_free_track() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, l) = blink_track(&mut rng, 750, 25.0, None, [3, 6], &EpisodeConfig::default());
        assert_eq!(a.len(), 750);
        assert!(l.iter().all(|&x| x == 0));
        let (_, l) = blink_track(&mut rng, 750, 25.0, Some([2.0, 6.0]), [3, 6], &EpisodeConfig::default());
        assert!(l.contains(&1));
    }
}
