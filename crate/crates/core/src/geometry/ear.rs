use super::landmarks::{distance, Point};
use crate::error::{Error, Result};

/// Eye aspect ratio `(|p2−p6| + |p3−p5|) / (2 |p1−p4|)` of the six eye
/// points p1..p6.
pub fn ear(eye: &[Point; 6]) -> Result<f64> {
    let [p1, p2, p3, p4, p5, p6] = *eye;
    let width = distance(p1, p4);
    if !(width > 1e-12) {
        return Err(Error::DegenerateGeometry("eye corners coincide".into()));
    }
    Ok((distance(p2, p6) + distance(p3, p5)) / (2.0 * width))
}
