//! Parametric grayscale face renderer with 68-point landmarks.
//!
//! Faces are drawn in a unit face frame (x right, y down, eye centers at
//! (0.35, 0.4) and (0.65, 0.4)) and mapped into the image by a per-video
//! pose. Each eye has an aperture `a ∈ [0, 1]`: lids are parabolic and the
//! lid gap at a = 1 gives an eye aspect ratio of [`EAR_AT_FULL_OPEN`].

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::landmarks::{Point, LANDMARK_COUNT};
use crate::geometry::transform::SimilarityTransform;
use crate::tensor::Tensor;

pub const EAR_AT_FULL_OPEN: f64 = 0.4;
/// Landmarks p2, p3, p5, p6 sit at ±w/6, where a parabolic lid reaches 8/9
/// of its peak height.
const LID_SAMPLE: f64 = 8.0 / 9.0;

pub const LEFT_EYE_CENTER: Point = [0.35, 0.4];
pub const RIGHT_EYE_CENTER: Point = [0.65, 0.4];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaceGeometry {
    /// Corner-to-corner eye width in face units.
    pub eye_width: f64,
}

impl Default for FaceGeometry {
    fn default() -> Self {
        Self { eye_width: 0.13 }
    }
}

impl FaceGeometry {
    /// Peak-to-peak lid gap at full aperture.
    pub fn max_gap(&self) -> f64 {
        EAR_AT_FULL_OPEN * self.eye_width / LID_SAMPLE
    }

    pub fn eye_points(&self, center: Point, aperture: f64) -> [Point; 6] {
        let half_w = self.eye_width / 2.0;
        let lid = aperture * self.max_gap() / 2.0 * LID_SAMPLE;
        let [cx, cy] = center;
        let s = self.eye_width / 6.0;
        [
            [cx - half_w, cy],
            [cx - s, cy - lid],
            [cx + s, cy - lid],
            [cx + half_w, cy],
            [cx + s, cy + lid],
            [cx - s, cy + lid],
        ]
    }

    /// All 68 landmarks in face units.
    pub fn landmarks(&self, apertures: [f64; 2]) -> Vec<Point> {
        let mut p = Vec::with_capacity(LANDMARK_COUNT);
        for k in 0..17 {
            let phi = std::f64::consts::PI * (1.0 - k as f64 / 16.0);
            p.push([0.5 + 0.38 * phi.cos(), 0.45 + 0.5 * phi.sin()]);
        }
        for (x0, x1) in [(0.22, 0.45), (0.55, 0.78)] {
            for k in 0..5 {
                let t = k as f64 / 4.0;
                p.push([x0 + (x1 - x0) * t, brow_y(t)]);
            }
        }
        for k in 0..4 {
            p.push([0.5, 0.44 + 0.055 * k as f64]);
        }
        for k in 0..5 {
            p.push([
                0.44 + 0.03 * k as f64,
                0.64 + 0.01 * (1.0 - ((k as f64 - 2.0) / 2.0).powi(2)),
            ]);
        }
        p.extend(self.eye_points(LEFT_EYE_CENTER, apertures[0]));
        p.extend(self.eye_points(RIGHT_EYE_CENTER, apertures[1]));
        mouth_ring(&mut p, 0.14, 0.05, 12);
        mouth_ring(&mut p, 0.09, 0.02, 8);
        p
    }
}

fn brow_y(t: f64) -> f64 {
    0.3 - 0.03 * (std::f64::consts::PI * t).sin()
}

/// Ring starting at the left mouth corner, running over the upper lip.
fn mouth_ring(p: &mut Vec<Point>, rx: f64, ry: f64, n: usize) {
    for k in 0..n {
        let phi = std::f64::consts::PI + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        p.push([0.5 + rx * phi.cos(), 0.78 + ry * phi.sin()]);
    }
}

/// Intensities and iris placement of one rendered subject.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceStyle {
    pub background: f64,
    pub skin: f64,
    pub sclera: f64,
    pub iris: f64,
    pub lashes: f64,
    /// Horizontal iris offset as a fraction of the eye width.
    pub gaze: f64,
}

impl FaceStyle {
    pub fn sample(rng: &mut impl Rng) -> Self {
        Self {
            background: rng.gen_range(0.05..0.3),
            skin: rng.gen_range(0.5..0.7),
            sclera: rng.gen_range(0.85..0.95),
            iris: rng.gen_range(0.15..0.4),
            lashes: rng.gen_range(0.1..0.25),
            gaze: rng.gen_range(-0.08..0.08),
        }
    }
}

/// Face-unit → image-pixel similarity of one video.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacePose {
    pub scale_px: f64,
    pub rotation_rad: f64,
    pub center: Point,
}

impl FacePose {
    pub fn sample(rng: &mut impl Rng, image_size: usize) -> Self {
        let s = image_size as f64;
        Self {
            scale_px: s * rng.gen_range(0.85..0.95),
            rotation_rad: rng.gen_range(-0.14..0.14),
            center: [s / 2.0 + rng.gen_range(-2.0..2.0), s / 2.0 + rng.gen_range(-2.0..2.0)],
        }
    }

    pub fn transform(&self) -> SimilarityTransform {
        let mut t = SimilarityTransform {
            scale: self.scale_px,
            rotation_rad: self.rotation_rad,
            translation: [0.0, 0.0],
        };
        let c = t.apply([0.5, 0.5]);
        t.translation = [self.center[0] - c[0], self.center[1] - c[1]];
        t
    }

    pub fn shifted(&self, dx: f64, dy: f64) -> Self {
        Self {
            center: [self.center[0] + dx, self.center[1] + dy],
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Eye {
    center: Point,
    half_w: f64,
    lid: f64,
}

struct Scene<'a> {
    geometry: &'a FaceGeometry,
    style: &'a FaceStyle,
    eyes: [Eye; 2],
}

impl Scene<'_> {
    fn new<'a>(geometry: &'a FaceGeometry, style: &'a FaceStyle, apertures: [f64; 2]) -> Scene<'a> {
        let eye = |center, a: f64| Eye {
            center,
            half_w: geometry.eye_width / 2.0,
            lid: a.clamp(0.0, 1.0) * geometry.max_gap() / 2.0,
        };
        Scene {
            geometry,
            style,
            eyes: [eye(LEFT_EYE_CENTER, apertures[0]), eye(RIGHT_EYE_CENTER, apertures[1])],
        }
    }

    fn near_eye(&self, u: Point) -> bool {
        let margin = 0.02;
        self.eyes.iter().any(|e| {
            (u[0] - e.center[0]).abs() < e.half_w + margin
                && (u[1] - e.center[1]).abs() < self.geometry.max_gap() / 2.0 + margin
        })
    }

    fn shade(&self, u: Point) -> f64 {
        let st = self.style;
        let [x, y] = u;
        if ((x - 0.5) / 0.42).powi(2) + ((y - 0.5) / 0.52).powi(2) > 1.0 {
            return st.background;
        }
        let mut v = st.skin + 0.08 * (0.5 - y);
        for (x0, x1) in [(0.22, 0.45), (0.55, 0.78)] {
            if x >= x0 && x <= x1 && (y - brow_y((x - x0) / (x1 - x0))).abs() < 0.018 {
                v = st.lashes + 0.1;
            }
        }
        if ((x - 0.5) / 0.14).powi(2) + ((y - 0.78) / 0.05).powi(2) < 1.0 {
            v = st.skin * 0.7;
        }
        for e in &self.eyes {
            let dx = x - e.center[0];
            let dy = y - e.center[1];
            if dx.abs() >= e.half_w {
                continue;
            }
            let t = 1.0 - (dx / e.half_w).powi(2);
            let upper = -e.lid * t;
            let lower = e.lid * t;
            if dy > upper && dy < lower {
                let r = (dx - st.gaze * 2.0 * e.half_w).hypot(dy);
                let w = 2.0 * e.half_w;
                v = if r < 0.09 * w {
                    0.05
                } else if r < 0.22 * w {
                    st.iris
                } else {
                    st.sclera
                };
            } else if dy <= upper && dy > upper - 0.012 * t.sqrt() - 0.004 {
                v = st.lashes;
            } else if dy >= lower && dy < lower + 0.006 {
                v = st.skin * 0.8;
            }
        }
        v
    }
}

/// Renders one `[size, size, 1]` frame and its landmarks in image pixels.
pub fn render_face(
    size: usize,
    geometry: &FaceGeometry,
    style: &FaceStyle,
    pose: &FacePose,
    apertures: [f64; 2],
    noise_sigma: f64,
    rng: &mut impl Rng,
) -> Result<(Tensor, Vec<Point>)> {
    let to_image = pose.transform();
    let to_face = to_image.inverse();
    let scene = Scene::new(geometry, style, apertures);
    let noise = Normal::new(0.0, noise_sigma.max(0.0)).expect("finite sigma");
    const SS: usize = 3;
    let mut data = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let centre = to_face.apply([j as f64 + 0.5, i as f64 + 0.5]);
            let mut v = if scene.near_eye(centre) {
                let mut acc = 0.0;
                for si in 0..SS {
                    for sj in 0..SS {
                        let p = [
                            j as f64 + (sj as f64 + 0.5) / SS as f64,
                            i as f64 + (si as f64 + 0.5) / SS as f64,
                        ];
                        acc += scene.shade(to_face.apply(p));
                    }
                }
                acc / (SS * SS) as f64
            } else {
                scene.shade(centre)
            };
            if noise_sigma > 0.0 {
                v += noise.sample(rng);
            }
            data.push(v.clamp(0.0, 1.0));
        }
    }
    let points = geometry
        .landmarks(apertures)
        .into_iter()
        .map(|p| to_image.apply(p))
        .collect();
    Ok((Tensor::new(vec![size, size, 1], data)?, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ear::ear;
    use crate::geometry::landmarks::{EyeSide, LandmarkFrame};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ear_tracks_aperture() {
        let g = FaceGeometry::default();
        for a in [0.0, 0.3, 0.5, 1.0] {
            let e = ear(&g.eye_points([0.3, 0.4], a)).unwrap();
            assert!((e - EAR_AT_FULL_OPEN * a).abs() < 1e-12);
        }
    }

    #[test]
    fn landmarks_survive_pose() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pose = FacePose::sample(&mut rng, 96);
        let style = FaceStyle::sample(&mut rng);
        let (img, points) =
            render_face(96, &FaceGeometry::default(), &style, &pose, [1.0, 0.25], 0.0, &mut rng).unwrap();
        assert_eq!(img.shape(), &[96, 96, 1]);
        let f = LandmarkFrame {
            frame_index: 0,
            timestamp_s: 0.0,
            points,
            left_label: None,
            right_label: None,
        };
        f.validate().unwrap();
        assert!((ear(&f.eye(EyeSide::Left)).unwrap() - 0.4).abs() < 1e-9);
        assert!((ear(&f.eye(EyeSide::Right)).unwrap() - 0.1).abs() < 1e-9);
    }

    #[test]
    fn open_eye_is_brighter_than_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pose = FacePose {
            scale_px: 90.0,
            rotation_rad: 0.0,
            center: [48.0, 48.0],
        };
        let style = FaceStyle {
            gaze: 0.0,
            ..FaceStyle::sample(&mut rng)
        };
        let g = FaceGeometry::default();
        let (img, _) = render_face(96, &g, &style, &pose, [1.0, 0.0], 0.0, &mut rng).unwrap();
        let probe = |c: Point| {
            let p = pose.transform().apply([c[0] + 0.03, c[1]]);
            img.at(&[p[1] as usize, p[0] as usize, 0])
        };
        assert!(probe(LEFT_EYE_CENTER) > style.skin);
        assert!(probe(RIGHT_EYE_CENTER) < style.skin);
    }
}
