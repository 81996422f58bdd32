//! Landmark geometry: alignment, eye-region crops and the eye aspect ratio.

pub mod crop;
pub mod ear;
pub mod landmarks;
pub mod transform;

pub use crop::{crop_eye_sequence, eye_crop_box, CropConfig, EyeBox};
pub use ear::ear;
pub use landmarks::{EyeSide, LandmarkFrame, Point};
pub use transform::{estimate_alignment, CanonicalFrame, SimilarityTransform};
