use serde::{Deserialize, Serialize};

use super::landmarks::{distance, EyeSide, LandmarkFrame, Point};
use crate::error::{Error, Result};

/// `p ↦ scale · R(rotation) · p + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation_rad: f64,
    pub translation: [f64; 2],
}

impl SimilarityTransform {
    pub const IDENTITY: Self = Self {
        scale: 1.0,
        rotation_rad: 0.0,
        translation: [0.0, 0.0],
    };

    pub fn new(scale: f64, rotation_rad: f64, translation: [f64; 2]) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::DegenerateGeometry(format!("similarity scale {scale}")));
        }
        Ok(Self {
            scale,
            rotation_rad,
            translation,
        })
    }

    /// Linear part as `[[a, -b], [b, a]]` with `a = s cos θ`, `b = s sin θ`.
    fn ab(&self) -> (f64, f64) {
        let (sin, cos) = self.rotation_rad.sin_cos();
        (self.scale * cos, self.scale * sin)
    }

    pub fn apply(&self, p: Point) -> Point {
        let (a, b) = self.ab();
        [
            a * p[0] - b * p[1] + self.translation[0],
            b * p[0] + a * p[1] + self.translation[1],
        ]
    }

    pub fn inverse(&self) -> Self {
        let inv_scale = 1.0 / self.scale;
        let rot = -self.rotation_rad;
        let (sin, cos) = rot.sin_cos();
        let [tx, ty] = self.translation;
        Self {
            scale: inv_scale,
            rotation_rad: rot,
            translation: [-inv_scale * (cos * tx - sin * ty), -inv_scale * (sin * tx + cos * ty)],
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let t = self.apply(other.translation);
        Self {
            scale: self.scale * other.scale,
            rotation_rad: self.rotation_rad + other.rotation_rad,
            translation: t,
        }
    }

    /// Exact similarity taking `src.0 → dst.0` and `src.1 → dst.1`.
    pub fn from_point_pairs(src: (Point, Point), dst: (Point, Point)) -> Result<Self> {
        let ds = [src.1[0] - src.0[0], src.1[1] - src.0[1]];
        let dd = [dst.1[0] - dst.0[0], dst.1[1] - dst.0[1]];
        let ls = ds[0].hypot(ds[1]);
        let ld = dd[0].hypot(dd[1]);
        if ls < 1e-12 || ld < 1e-12 {
            return Err(Error::DegenerateGeometry("coincident reference points".into()));
        }
        let scale = ld / ls;
        let rotation_rad = dd[1].atan2(dd[0]) - ds[1].atan2(ds[0]);
        let mut t = Self::new(scale, rotation_rad, [0.0, 0.0])?;
        let moved = t.apply(src.0);
        t.translation = [dst.0[0] - moved[0], dst.0[1] - moved[1]];
        Ok(t)
    }
}

/// Target geometry of an aligned face.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CanonicalFrame {
    pub width: f64,
    pub height: f64,
    pub left_eye: Point,
    pub right_eye: Point,
}

impl Default for CanonicalFrame {
    /// 256×256 with eye centers at (0.35 W, 0.40 H) and (0.65 W, 0.40 H).
    fn default() -> Self {
        Self::with_size(256.0, 256.0)
    }
}

impl CanonicalFrame {
    pub fn with_size(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            left_eye: [0.35 * width, 0.40 * height],
            right_eye: [0.65 * width, 0.40 * height],
        }
    }

    pub fn eye_separation(&self) -> f64 {
        distance(self.left_eye, self.right_eye)
    }
}

/// Similarity that places the frame's eye centers (means of each eye's six
/// landmarks) on the canonical horizontal pair.
pub fn estimate_alignment(frame: &LandmarkFrame, canonical: &CanonicalFrame) -> Result<SimilarityTransform> {
    let l = frame.eye_center(EyeSide::Left);
    let r = frame.eye_center(EyeSide::Right);
    if distance(l, r) < 1e-9 {
        return Err(Error::DegenerateGeometry(format!(
            "frame {}: eye centers coincide",
            frame.frame_index
        )));
    }
    SimilarityTransform::from_point_pairs((l, r), (canonical.left_eye, canonical.right_eye))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn close(a: Point, b: Point, tol: f64) -> bool {
        (a[0] - b[0]).abs() < tol && (a[1] - b[1]).abs() < tol
    }

    #[test]
    fn inverse_and_compose() {
        let t = SimilarityTransform::new(1.7, 0.4, [3.0, -2.0]).unwrap();
        let id = t.compose(&t.inverse());
        for p in [[0.0, 0.0], [10.0, -4.0], [-3.5, 7.25]] {
            assert!(close(id.apply(p), p, 1e-9));
            assert!(close(t.inverse().apply(t.apply(p)), p, 1e-9));
        }
    }

    #[test]
    fn diagonal_eyes_rotate_minus_45_degrees() {
        let t =
            SimilarityTransform::from_point_pairs(([0.0, 0.0], [1.0, 1.0]), ([0.0, 0.0], [2f64.sqrt(), 0.0])).unwrap();
        assert!((t.rotation_rad + FRAC_PI_4).abs() < 1e-12);
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!(close(t.apply([1.0, 1.0]), [2f64.sqrt(), 0.0], 1e-12));
    }

    #[test]
    fn degenerate_pairs_rejected() {
        assert!(matches!(
            SimilarityTransform::from_point_pairs(([1.0, 1.0], [1.0, 1.0]), ([0.0, 0.0], [1.0, 0.0])),
            Err(Error::DegenerateGeometry(_))
        ));
    }
}
