use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::landmarks::{LandmarkFrame, Point, EYEBROWS, LOWER_LIP};

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain. Vertices come back in positive-cross order
/// (counter-clockwise with y up, clockwise on screen), collinear points
/// dropped.
pub fn convex_hull(points: &[Point]) -> Result<Vec<Point>> {
    let mut pts: Vec<Point> = points.to_vec();
    if pts.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateGeometry("non-finite hull point".into()));
    }
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "{} distinct points, need 3",
            pts.len()
        )));
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(Error::DegenerateGeometry("all points are collinear".into()));
    }
    Ok(lower)
}

/// Whether `p` is inside or on a convex polygon from [`convex_hull`].
pub fn polygon_contains(vertices: &[Point], p: Point) -> bool {
    let n = vertices.len();
    (0..n).all(|k| cross(vertices[k], vertices[(k + 1) % n], p) >= -1e-9)
}

/// Convex polygon and its rasterization; a pixel is inside when its center
/// is.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonMask {
    pub vertices: Vec<Point>,
    pub width: usize,
    pub height: usize,
    #[serde(skip)]
    pub raster: Vec<u8>,
}

impl PolygonMask {
    pub fn from_points(points: &[Point], width: usize, height: usize) -> Result<Self> {
        let vertices = convex_hull(points)?;
        let mut raster = vec![0u8; width * height];
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for v in &vertices {
            x0 = x0.min(v[0]);
            x1 = x1.max(v[0]);
            y0 = y0.min(v[1]);
            y1 = y1.max(v[1]);
        }
        let cols = (x0 - 0.5).ceil().max(0.0) as usize..((x1 - 0.5).floor() + 1.0).clamp(0.0, width as f64) as usize;
        let rows = (y0 - 0.5).ceil().max(0.0) as usize..((y1 - 0.5).floor() + 1.0).clamp(0.0, height as f64) as usize;
        for i in rows {
            for j in cols.clone() {
                if polygon_contains(&vertices, [j as f64 + 0.5, i as f64 + 0.5]) {
                    raster[i * width + j] = 1;
                }
            }
        }
        Ok(Self {
            vertices,
            width,
            height,
            raster,
        })
    }

    pub fn at(&self, row: usize, col: usize) -> bool {
        self.raster[row * self.width + col] == 1
    }

    pub fn area(&self) -> usize {
        self.raster.iter().map(|&v| v as usize).sum()
    }

    pub fn contains(&self, p: Point) -> bool {
        polygon_contains(&self.vertices, p)
    }
}

/// Hull of both eyebrows and the lower lip.
pub fn build_mask(frame: &LandmarkFrame, width: usize, height: usize) -> Result<PolygonMask> {
    frame.validate()?;
    let pts: Vec<Point> = EYEBROWS.chain(LOWER_LIP).map(|k| frame.points[k]).collect();
    PolygonMask::from_points(&pts, width, height)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_and_interior_points() {
        let pts = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [2.0, 2.0], [5.0, 0.0]];
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.len(), 3);
        assert!(!hull.contains(&[2.0, 2.0]));
        assert!(!hull.contains(&[5.0, 0.0]));
        let m = PolygonMask::from_points(&pts, 12, 12).unwrap();
        assert!(m.at(3, 3));
        assert!(!m.at(9, 9));
    }

    #[test]
    fn square_area() {
        let m = PolygonMask::from_points(&[[2.0, 3.0], [42.0, 3.0], [42.0, 33.0], [2.0, 33.0]], 50, 40).unwrap();
        assert_eq!(m.area(), 40 * 30);
    }

    #[test]
    fn too_few_points() {
        assert!(convex_hull(&[[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]]).is_err());
        assert!(convex_hull(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_err());
    }
}
