//! Viewpoint normalization by unpacking the three visible box faces into a
//! single plane:
//!
//! ```text
//!     U = | 0  R |
//!         | F  S |
//! ```
//!
//! F is the front/rear face, S the side, R the roof; the top-left block is
//! zero. The shared physical edge b1b5 maps onto the F/S block boundary and
//! b1b2 onto the R/S boundary, so face content is continuous across blocks.

use crate::box3d::Box3D;
use crate::error::{Error, Result};
use crate::geom::{homography_from_quads, warp_perspective, Quad};
use image::RgbImage;
use serde::{Deserialize, Serialize};

/// Default output resolution of the unpacked image.
pub const DEFAULT_TARGET: u32 = 256;
/// Smallest allowed block dimension in pixels.
pub const MIN_BLOCK: u32 = 8;
/// Block split ratios are clamped to this range.
pub const RATIO_CLAMP: (f64, f64) = (0.25, 0.75);

/// Block geometry of the unpacked matrix. The full image is H x W with
/// W = w_f + w_s and H = h_r + h_s; the roof block is h_r x w_s, the front
/// block h_s x w_f, the side block h_s x w_s and the zero block h_r x w_f.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnpackLayout {
    pub w_f: u32,
    pub w_s: u32,
    pub h_r: u32,
    pub h_s: u32,
}

impl UnpackLayout {
    pub fn new(w_f: u32, w_s: u32, h_r: u32, h_s: u32) -> Result<Self> {
        for (name, v) in [("w_f", w_f), ("w_s", w_s), ("h_r", h_r), ("h_s", h_s)] {
            if v < MIN_BLOCK {
                return Err(Error::InvalidData(format!(
                    "block dimension {name}={v} below {MIN_BLOCK} px"
                )));
            }
        }
        Ok(Self { w_f, w_s, h_r, h_s })
    }

    pub fn width(&self) -> u32 {
        self.w_f + self.w_s
    }

    pub fn height(&self) -> u32 {
        self.h_r + self.h_s
    }
}

/// An unpacked image together with its block geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct UnpackedImage {
    pub pixels: RgbImage,
    pub layout: UnpackLayout,
}

/// Derives the block split from the projected face edge lengths: the F/S
/// width split follows |b0b1| versus |b1b2|, the R/S height split |b0b1|
/// (roof depth) versus |b1b5| (side height); both ratios are clamped.
pub fn layout_from_box(b: &Box3D, target: u32) -> Result<UnpackLayout> {
    if target < 4 * MIN_BLOCK {
        return Err(Error::InvalidData(format!(
            "target {target} below {}",
            4 * MIN_BLOCK
        )));
    }
    let len_f = b.vertex(0).distance(b.vertex(1));
    let len_s = b.vertex(1).distance(b.vertex(2));
    let len_v = b.vertex(1).distance(b.vertex(5));
    let (lo, hi) = RATIO_CLAMP;

    let rw = (len_f / (len_f + len_s)).clamp(lo, hi);
    let w_f = (target as f64 * rw).round() as u32;
    let rh = (len_f / (len_f + len_v)).clamp(lo, hi);
    let h_r = (target as f64 * rh).round() as u32;
    UnpackLayout::new(w_f, target - w_f, h_r, target - h_r)
}

/// How far outside the source image a box vertex may lie (sampled as black).
pub const VERTEX_BOUNDS_TOLERANCE: f64 = 10.0;

/// Warps the three face quads into their blocks. Box vertices may lie up to
/// 10 px outside the source image (those samples come back black); the zero
/// block is explicitly cleared.
pub fn unpack(img: &RgbImage, b: &Box3D, layout: &UnpackLayout) -> Result<UnpackedImage> {
    let (iw, ih) = img.dimensions();
    for (i, v) in b.vertices().iter().enumerate() {
        if v.x < -VERTEX_BOUNDS_TOLERANCE
            || v.y < -VERTEX_BOUNDS_TOLERANCE
            || v.x > iw as f64 + VERTEX_BOUNDS_TOLERANCE
            || v.y > ih as f64 + VERTEX_BOUNDS_TOLERANCE
        {
            return Err(Error::InvalidData(format!(
                "vertex b{i} at ({:.1}, {:.1}) more than {VERTEX_BOUNDS_TOLERANCE} px outside the {iw}x{ih} image",
                v.x, v.y
            )));
        }
    }
    let w = layout.width();
    let h = layout.height();
    let (w_f, h_r) = (layout.w_f as f64, layout.h_r as f64);
    let (wf64, hf64) = (w as f64, h as f64);

    // Destination rectangles with their corner correspondences. Block corner
    // order is TL, TR, BR, BL; all three blocks meet at the image of b1.
    let v = b.vertices();
    let front_src = b.front_quad()?;
    let side_src = b.side_quad()?;
    let roof_src = Quad::new(v[0], v[3], v[2], v[1])
        .map_err(|e| Error::DegenerateFace(format!("roof face: {e}")))?;

    // Source corner orders b0 b1 b5 b4 (F), b1 b2 b6 b5 (S) and b0 b3 b2 b1
    // (R) map to the block corners TL, TR, BR, BL.
    let front_dst = Quad::from_rect(0.0, h_r, w_f, hf64)
        .map_err(|e| Error::InvalidData(e.to_string()))?;
    let side_dst = Quad::from_rect(w_f, h_r, wf64, hf64)
        .map_err(|e| Error::InvalidData(e.to_string()))?;
    let roof_dst = Quad::from_rect(w_f, 0.0, wf64, h_r)
        .map_err(|e| Error::InvalidData(e.to_string()))?;

    let mut out = RgbImage::new(w, h);
    for (src, dst) in [
        (front_src, front_dst),
        (side_src, side_dst),
        (roof_src, roof_dst),
    ] {
        let hom = homography_from_quads(&dst, &src)
            .map_err(|e| Error::DegenerateFace(format!("face warp: {e}")))?;
        // Pull the block's pixels from the source image.
        let x0 = dst.p[0].x as u32;
        let y0 = dst.p[0].y as u32;
        let bw = (dst.p[2].x - dst.p[0].x) as u32;
        let bh = (dst.p[2].y - dst.p[0].y) as u32;
        let shift = crate::geom::Homography::translation(dst.p[0].x, dst.p[0].y);
        let local = hom.compose(&shift).map_err(|_| Error::SingularHomography)?;
        let block = warp_perspective(img, &local.inverse()?, bw, bh)?;
        for by in 0..bh {
            for bx in 0..bw {
                out.put_pixel(x0 + bx, y0 + by, *block.get_pixel(bx, by));
            }
        }
    }
    // Zero block.
    for y in 0..layout.h_r {
        for x in 0..layout.w_f {
            out.get_pixel_mut(x, y).0 = [0, 0, 0];
        }
    }
    Ok(UnpackedImage {
        pixels: out,
        layout: *layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::box3d::TravelDirection;
    use crate::geom::Point2;
    use crate::synthetic;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_symmetric_box() {
        // All three projected edges have length 100: every block is half the
        // target.
        let a = 10.0f64.to_radians();
        let s = synthetic::cuboid(
            Point2::new(200.0, 200.0),
            Point2::new(100.0 * a.cos(), 100.0 * a.sin()),
            Point2::new(-100.0 * a.cos(), 100.0 * a.sin()),
            Point2::new(0.0, -100.0),
            TravelDirection::Toward,
        )
        .unwrap();
        let layout = layout_from_box(&s.box3d, 256).unwrap();
        assert_eq!(
            (layout.w_f, layout.w_s, layout.h_r, layout.h_s),
            (128, 128, 128, 128)
        );
    }

    #[test]
    fn layout_clamps_elongated_side() {
        // Side edge much longer than the front edge: the ratio clamps at 0.25.
        let s = synthetic::cuboid(
            Point2::new(320.0, 200.0),
            Point2::new(40.0, 20.0),
            Point2::new(-240.0, 50.0),
            Point2::new(2.0, -160.0),
            TravelDirection::Toward,
        )
        .unwrap();
        let layout = layout_from_box(&s.box3d, 256).unwrap();
        assert_eq!(layout.w_f, 64);
        assert_eq!(layout.w_s, 192);
    }

    #[test]
    fn layout_blocks_always_sum_to_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let s = synthetic::random_cuboid(&mut rng);
            let layout = layout_from_box(&s.box3d, 256).unwrap();
            assert_eq!(layout.w_f + layout.w_s, 256);
            assert_eq!(layout.h_r + layout.h_s, 256);
        }
    }

    #[test]
    fn unpack_flood_filled_faces_give_uniform_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let s = synthetic::random_cuboid(&mut rng);
        let colors = [[200u8, 40, 40], [40, 200, 40], [40, 40, 200]];
        let img = synthetic::render_face_fill(&s.box3d, 512, 512, colors).unwrap();
        let layout = layout_from_box(&s.box3d, 256).unwrap();
        let u = unpack(&img, &s.box3d, &layout).unwrap();

        let check_block = |x0: u32, y0: u32, x1: u32, y1: u32, want: [u8; 3]| {
            let m = 4; // stay clear of interpolation at block borders
            for y in (y0 + m)..(y1 - m) {
                for x in (x0 + m)..(x1 - m) {
                    assert_eq!(
                        u.pixels.get_pixel(x, y).0,
                        want,
                        "block pixel ({x},{y})"
                    );
                }
            }
        };
        let (wf, hr) = (layout.w_f, layout.h_r);
        let (w, h) = (layout.width(), layout.height());
        check_block(0, hr, wf, h, colors[0]); // F
        check_block(wf, hr, w, h, colors[1]); // S
        check_block(wf, 0, w, hr, colors[2]); // R
    }

    #[test]
    fn unpack_zero_block_is_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let s = synthetic::random_cuboid(&mut rng);
        let mut img = RgbImage::new(512, 512);
        for p in img.pixels_mut() {
            p.0 = [255, 255, 255];
        }
        let layout = layout_from_box(&s.box3d, 256).unwrap();
        let u = unpack(&img, &s.box3d, &layout).unwrap();
        assert_eq!(u.pixels.dimensions(), (256, 256));
        for y in 0..layout.h_r {
            for x in 0..layout.w_f {
                assert_eq!(u.pixels.get_pixel(x, y).0, [0, 0, 0]);
            }
        }
    }

    #[test]
    fn painted_shared_edge_lands_on_block_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..3 {
            let s = synthetic::random_cuboid(&mut rng);
            let img = synthetic::render_edge_paint(&s.box3d, 512, 512, 1, 5, 2.0);
            let layout = layout_from_box(&s.box3d, 256).unwrap();
            let u = unpack(&img, &s.box3d, &layout).unwrap();
            // The physical edge b1b5 maps to the continuous x = w_f boundary
            // in both the F and the S warp, so the painted stripe must cover
            // the boundary columns and stay localized around them.
            let wf = layout.w_f;
            for y in (layout.h_r + 3)..(layout.height() - 3) {
                let bright: Vec<u32> = (0..layout.width())
                    .filter(|&x| u.pixels.get_pixel(x, y).0[0] >= 200)
                    .collect();
                assert!(!bright.is_empty(), "row {y} has no painted response");
                assert!(
                    bright.iter().any(|&x| x + 2 >= wf && x <= wf + 1),
                    "row {y}: paint misses the boundary column {wf} (bright: {bright:?})"
                );
                for &x in &bright {
                    assert!(
                        (x as f64 - wf as f64).abs() <= 20.0,
                        "row {y}: stray paint at column {x}"
                    );
                }
            }
        }
    }

    #[test]
    fn painted_roof_side_edge_lands_on_row_boundary() {
        // The physical edge b1b2 maps to the continuous y = h_r boundary in
        // both the R and the S warp.
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let s = synthetic::random_cuboid(&mut rng);
        let img = synthetic::render_edge_paint(&s.box3d, 512, 512, 1, 2, 2.0);
        let layout = layout_from_box(&s.box3d, 256).unwrap();
        let u = unpack(&img, &s.box3d, &layout).unwrap();
        let hr = layout.h_r;
        for x in (layout.w_f + 3)..(layout.width() - 3) {
            let bright: Vec<u32> = (0..layout.height())
                .filter(|&y| u.pixels.get_pixel(x, y).0[0] >= 200)
                .collect();
            assert!(!bright.is_empty(), "column {x} has no painted response");
            assert!(
                bright.iter().any(|&y| y + 2 >= hr && y <= hr + 1),
                "column {x}: paint misses the boundary row {hr} (bright: {bright:?})"
            );
        }
    }

    #[test]
    fn unpack_equivariant_to_prewarp() {
        use crate::geom::{homography_from_quads, warp_perspective, Homography, Quad};
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let s = synthetic::random_cuboid(&mut rng);

        // Smooth source image.
        let mut img = RgbImage::new(512, 512);
        for (x, y, p) in img.enumerate_pixels_mut() {
            let fx = x as f64 / 512.0;
            let fy = y as f64 / 512.0;
            let tau = std::f64::consts::TAU;
            p.0 = [
                (255.0 * fx) as u8,
                (255.0 * fy) as u8,
                (255.0 * 0.5 * (1.0 + (tau * fx).sin() * (tau * fy).cos())) as u8,
            ];
        }

        // Mild homography: identity + small corner jitter.
        use rand::Rng;
        let base = Quad::from_rect(0.0, 0.0, 512.0, 512.0).unwrap();
        let jittered = Quad::new(
            Point2::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)),
            Point2::new(512.0 + rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)),
            Point2::new(
                512.0 + rng.gen_range(-4.0..4.0),
                512.0 + rng.gen_range(-4.0..4.0),
            ),
            Point2::new(rng.gen_range(-4.0..4.0), 512.0 + rng.gen_range(-4.0..4.0)),
        )
        .unwrap();
        let h: Homography = homography_from_quads(&base, &jittered).unwrap();

        let warped = warp_perspective(&img, &h, 512, 512).unwrap();
        let moved: Vec<Point2> = s
            .box3d
            .vertices()
            .iter()
            .map(|p| h.apply(*p).unwrap())
            .collect();
        let moved_box = crate::box3d::Box3D::new(
            [
                moved[0], moved[1], moved[2], moved[3], moved[4], moved[5], moved[6], moved[7],
            ],
            s.box3d.direction(),
        )
        .unwrap();

        let layout = layout_from_box(&s.box3d, 256).unwrap();
        let u1 = unpack(&img, &s.box3d, &layout).unwrap();
        let u2 = unpack(&warped, &moved_box, &layout).unwrap();
        let mut sum = 0.0;
        let mut n = 0usize;
        for (p1, p2) in u1.pixels.pixels().zip(u2.pixels.pixels()) {
            for c in 0..3 {
                sum += (p1.0[c] as f64 - p2.0[c] as f64).abs();
                n += 1;
            }
        }
        let mae = sum / n as f64;
        assert!(mae < 3.0, "pre-warp equivariance MAE {mae}");
    }
}
