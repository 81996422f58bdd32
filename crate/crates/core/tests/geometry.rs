use blinkscan_core::geometry::crop::{crop_box, EyeBox};
use blinkscan_core::geometry::landmarks::{EyeSide, LandmarkFrame, Point};
use blinkscan_core::geometry::{ear, estimate_alignment, CanonicalFrame, SimilarityTransform};
use blinkscan_core::Tensor;
use proptest::prelude::*;

fn eye_strategy() -> impl Strategy<Value = [Point; 6]> {
    // Corners apart, lids above and below, so the width never degenerates.
    (
        1.0..50.0f64,
        prop::array::uniform4(0.1..20.0f64),
        prop::array::uniform4(-2.0..2.0f64),
    )
        .prop_map(|(w, lid, dx)| {
            [
                [0.0, 0.0],
                [w * 0.3 + dx[0], -lid[0]],
                [w * 0.7 + dx[1], -lid[1]],
                [w, 0.0],
                [w * 0.7 + dx[2], lid[2]],
                [w * 0.3 + dx[3], lid[3]],
            ]
        })
}

fn similarity_strategy() -> impl Strategy<Value = SimilarityTransform> {
    (
        0.05..20.0f64,
        -std::f64::consts::PI..std::f64::consts::PI,
        -500.0..500.0f64,
        -500.0..500.0f64,
    )
        .prop_map(|(s, r, tx, ty)| SimilarityTransform::new(s, r, [tx, ty]).unwrap())
}

#[test]
fn ear_fixture_is_one_half() {
    let eye = [[0.0, 0.0], [1.0, 1.0], [3.0, 1.0], [4.0, 0.0], [3.0, -1.0], [1.0, -1.0]];
    assert!((ear(&eye).unwrap() - 0.5).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ear_is_similarity_invariant(eye in eye_strategy(), t in similarity_strategy()) {
        let moved = eye.map(|p| t.apply(p));
        let (a, b) = (ear(&eye).unwrap(), ear(&moved).unwrap());
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

fn face(left: Point, right: Point) -> LandmarkFrame {
    let mut points = vec![[0.0, 0.0]; 68];
    for (range, c) in [(36..42, left), (42..48, right)] {
        for (k, i) in range.enumerate() {
            let a = k as f64 * std::f64::consts::PI / 3.0;
            points[i] = [c[0] + 3.0 * a.cos(), c[1] + 1.5 * a.sin()];
        }
    }
    LandmarkFrame {
        frame_index: 0,
        timestamp_s: 0.0,
        points,
        left_label: None,
        right_label: None,
    }
}

proptest! {
    #[test]
    fn alignment_lands_eyes_on_canonical(t in similarity_strategy(), size in 32.0..512.0f64) {
        let canonical = CanonicalFrame::with_size(size, size);
        let frame = face(t.apply([-1.0, 0.0]), t.apply([1.0, 0.0]));
        let a = estimate_alignment(&frame, &canonical).unwrap();
        for (side, target) in [(EyeSide::Left, canonical.left_eye), (EyeSide::Right, canonical.right_eye)] {
            let p = a.apply(frame.eye_center(side));
            prop_assert!((p[0] - target[0]).abs() < 1e-6 && (p[1] - target[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn inverse_round_trips(t in similarity_strategy(), x in -100.0..100.0f64, y in -100.0..100.0f64) {
        let back = t.inverse().apply(t.apply([x, y]));
        prop_assert!((back[0] - x).abs() < 1e-8 && (back[1] - y).abs() < 1e-8);
    }
}

fn image(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> Tensor {
    Tensor::new(vec![h, w, 1], (0..h * w).map(|k| f(k / w, k % w)).collect()).unwrap()
}

fn full_box(h: usize, w: usize) -> EyeBox {
    EyeBox {
        center: [w as f64 / 2.0, h as f64 / 2.0],
        width: w as f64,
        height: h as f64,
        eye: None,
    }
}

#[test]
fn crop_of_constant_image_is_constant() {
    let img = image(40, 50, |_, _| 1.0);
    let bbox = EyeBox {
        center: [20.0, 18.0],
        width: 13.0,
        height: 7.5,
        eye: None,
    };
    let (crop, outside) = crop_box(&img, &bbox, &SimilarityTransform::IDENTITY, 36, 60).unwrap();
    assert!(!outside);
    assert!(crop.data().iter().all(|&v| v == 1.0));
}

#[test]
fn full_frame_crop_at_native_size_is_a_copy() {
    let img = image(12, 20, |i, j| ((i * 7 + j * 3) % 11) as f64 / 10.0);
    let (crop, outside) = crop_box(&img, &full_box(12, 20), &SimilarityTransform::IDENTITY, 12, 20).unwrap();
    assert!(!outside);
    assert_eq!(crop, img);
}

#[test]
fn gradient_crop_matches_nearest_pixel_within_one_level() {
    // A ramp of one gray level per pixel: bilinear samples sit within one
    // level of the nearest source pixel.
    let img = image(64, 64, |i, j| (i + j) as f64 / 255.0);
    let bbox = EyeBox {
        center: [30.3, 29.1],
        width: 21.7,
        height: 12.4,
        eye: None,
    };
    let (crop, _) = crop_box(&img, &bbox, &SimilarityTransform::IDENTITY, 36, 60).unwrap();
    for r in 0..36 {
        for c in 0..60 {
            let x = bbox.left() + (c as f64 + 0.5) * bbox.width / 60.0;
            let y = bbox.top() + (r as f64 + 0.5) * bbox.height / 36.0;
            let nearest = ((x - 0.5).round() + (y - 0.5).round()) / 255.0;
            assert!((crop.data()[r * 60 + c] - nearest).abs() <= 1.0 / 255.0 + 1e-12);
        }
    }
}

#[test]
fn crop_reports_out_of_frame_boxes() {
    let img = image(10, 10, |_, _| 0.5);
    let bbox = EyeBox {
        center: [1.0, 1.0],
        width: 6.0,
        height: 6.0,
        eye: None,
    };
    let (crop, outside) = crop_box(&img, &bbox, &SimilarityTransform::IDENTITY, 6, 6).unwrap();
    assert!(outside);
    assert!(crop.data().iter().all(|&v| v == 0.5));
}
