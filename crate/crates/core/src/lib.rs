//! Eye-blink forensics for face videos.
//!
//! Eye crops or facial landmarks extracted from a video are classified
//! frame by frame as open or closed (by a convolutional frame classifier,
//! a recurrent LRCN classifier, or the eye aspect ratio), segmented into
//! blink events and summarized into blink statistics. Videos whose blink
//! rate or blinkless gaps are physiologically implausible are flagged as
//! suspect.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod compositor;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod image;
pub mod nn;
pub mod pipeline;
pub mod sequence;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
