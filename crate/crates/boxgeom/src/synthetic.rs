//! Procedural cuboid projections and fixture renderers.
//!
//! A synthetic box is produced from three projected edge vectors under a
//! parallel projection: with the vanishing points at infinity, all four box
//! edges of one family share a single image direction. These boxes serve as
//! ground truth for the construction round trip and as inputs for rendered
//! fixtures (silhouette contour maps, face-colored images, painted edges).

use crate::box3d::{Box3D, DirectionTriplet, TravelDirection};
use crate::error::{Error, Result};
use crate::estimate::ContourMap;
use crate::geom::{convex_hull, ConvexPolygon, Point2};
use crate::rast::point_in_quad;
use image::RgbImage;
use rand::Rng;

/// A generated box together with the exact directions that produced it.
#[derive(Debug, Clone)]
pub struct SyntheticCuboid {
    pub box3d: Box3D,
    pub dirs: DirectionTriplet,
}

/// Builds a parallel-projected cuboid from its hidden bottom corner `origin`
/// (= b7) and the three projected edge vectors.
///
/// `e_f` and `e_s` span the ground face, `e_r` is the (image-up) vertical
/// edge. The configuration must leave b1 and b7 inside the silhouette, which
/// holds when e_f points down-right, e_s down-left and e_r up with
/// |e_r.y| > e_f.y + e_s.y.
pub fn cuboid(
    origin: Point2,
    e_f: Point2,
    e_s: Point2,
    e_r: Point2,
    d: TravelDirection,
) -> Result<SyntheticCuboid> {
    let b7 = origin;
    let b4 = b7 + e_s;
    let b6 = b7 + e_f;
    let b5 = b7 + e_f + e_s;
    let b0 = b4 + e_r;
    let b1 = b5 + e_r;
    let b2 = b6 + e_r;
    let b3 = b7 + e_r;
    let dirs = DirectionTriplet::new(e_f, e_s, e_r)?;
    let box3d = Box3D::new([b0, b1, b2, b3, b4, b5, b6, b7], d)?;

    // b1 and b7 must be interior: the silhouette of a generic three-face view
    // is the hexagon of the remaining six vertices.
    let hull = convex_hull(box3d.vertices())?;
    if hull.vertices.len() != 6 {
        return Err(Error::DegenerateSilhouette(format!(
            "projection has a {}-vertex silhouette, expected 6",
            hull.vertices.len()
        )));
    }
    Ok(SyntheticCuboid { box3d, dirs })
}

/// Samples a random valid cuboid. The silhouette fits within roughly
/// [30, 380]^2, comfortably inside a 512x512 canvas.
pub fn random_cuboid<R: Rng>(rng: &mut R) -> SyntheticCuboid {
    loop {
        let ang_f = rng.gen_range(10.0f64..55.0).to_radians();
        let ang_s = rng.gen_range(125.0f64..170.0).to_radians();
        let ang_r = rng.gen_range(-100.0f64..-80.0).to_radians();
        let l_f = rng.gen_range(40.0..110.0);
        let l_s = rng.gen_range(40.0..110.0);
        let e_f = Point2::new(ang_f.cos() * l_f, ang_f.sin() * l_f);
        let e_s = Point2::new(ang_s.cos() * l_s, ang_s.sin() * l_s);
        let y_target = (e_f.y + e_s.y) * rng.gen_range(1.2..1.8);
        let l_r = y_target / ang_r.sin().abs();
        let e_r = Point2::new(ang_r.cos() * l_r, ang_r.sin() * l_r);

        // Normalize the bounding-box extent, then place inside the canvas.
        let probe = [
            Point2::new(0.0, 0.0),
            e_f,
            e_s,
            e_r,
            e_f + e_s,
            e_f + e_s + e_r,
            e_r + e_f,
            e_r + e_s,
        ];
        let min_x = probe.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let max_x = probe.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let min_y = probe.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let max_y = probe.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        let span = (max_x - min_x).max(max_y - min_y).max(1.0);
        let scale = rng.gen_range(140.0..280.0) / span;
        let e_f = e_f * scale;
        let e_s = e_s * scale;
        let e_r = e_r * scale;

        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for p in [
            Point2::new(0.0, 0.0),
            e_f,
            e_s,
            e_f + e_s,
            e_r,
            e_r + e_f,
            e_r + e_s,
            e_r + e_f + e_s,
        ] {
            xs.push(p.x);
            ys.push(p.y);
        }
        let min_x = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let min_y = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let origin = Point2::new(
            rng.gen_range(30.0..90.0) - min_x,
            rng.gen_range(30.0..90.0) - min_y,
        );
        let d = if rng.gen_bool(0.5) {
            TravelDirection::Toward
        } else {
            TravelDirection::Away
        };
        if let Ok(s) = cuboid(origin, e_f, e_s, e_r, d) {
            return s;
        }
    }
}

/// Convex silhouette of the projected box (hull of the eight vertices).
pub fn silhouette(b: &Box3D) -> Result<ConvexPolygon> {
    convex_hull(b.vertices())
}

fn v3(x: f64, y: f64, z: f64) -> [f64; 3] {
    [x, y, z]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dotv(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn crossv(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normv(a: [f64; 3]) -> [f64; 3] {
    let n = dotv(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Perspective fixture: a ground-plane cuboid with the given yaw seen by an
/// elevated pinhole camera looking at the world origin.
///
/// World frame: x east, y north, z up; the vehicle faces the camera side at
/// yaw 0. Returns the labeled box with the travel flag set from whether the
/// front faces the camera.
pub fn perspective_cuboid(
    yaw_deg: f64,
    camera_pos: [f64; 3],
    focal: f64,
    principal: Point2,
    dims: (f64, f64, f64),
) -> Result<Box3D> {
    let (length, width, height) = dims;
    let yaw = yaw_deg.to_radians();
    let forward = v3(yaw.sin(), -yaw.cos(), 0.0);
    let right = v3(yaw.cos(), yaw.sin(), 0.0);

    // Camera basis: z toward the target, x image-right, y image-down.
    let z_cam = normv(sub(v3(0.0, 0.0, 0.0), camera_pos));
    let x_cam = normv(crossv(z_cam, v3(0.0, 0.0, 1.0)));
    let y_cam = crossv(z_cam, x_cam);
    let project = |p: [f64; 3]| -> Result<Point2> {
        let rel = sub(p, camera_pos);
        let z = dotv(rel, z_cam);
        if z <= 1e-6 {
            return Err(Error::DegenerateInput("point behind the camera".into()));
        }
        Ok(Point2::new(
            focal * dotv(rel, x_cam) / z + principal.x,
            focal * dotv(rel, y_cam) / z + principal.y,
        ))
    };

    let corner = |sl: f64, sw: f64, z: f64| {
        v3(
            sl * length / 2.0 * forward[0] + sw * width / 2.0 * right[0],
            sl * length / 2.0 * forward[1] + sw * width / 2.0 * right[1],
            z,
        )
    };
    // Top corner nearest the camera is b1 (the one where the three visible
    // faces meet); b0 flips the width sign, b2 the length sign.
    let mut best = (1.0, 1.0);
    let mut best_d2 = f64::INFINITY;
    for sl in [-1.0, 1.0] {
        for sw in [-1.0, 1.0] {
            let c = corner(sl, sw, height);
            let d = sub(c, camera_pos);
            let d2 = dotv(d, d);
            if d2 < best_d2 {
                best_d2 = d2;
                best = (sl, sw);
            }
        }
    }
    let (sl, sw) = best;
    let tops = [
        corner(sl, -sw, height),
        corner(sl, sw, height),
        corner(-sl, sw, height),
        corner(-sl, -sw, height),
    ];
    let mut verts = [Point2::new(0.0, 0.0); 8];
    for (i, t) in tops.iter().enumerate() {
        verts[i] = project(*t)?;
        verts[i + 4] = project(v3(t[0], t[1], 0.0))?;
    }
    // Vehicle heading toward the camera means the front face is visible.
    let d = if dotv(forward, camera_pos) > 0.0 {
        TravelDirection::Toward
    } else {
        TravelDirection::Away
    };
    Box3D::new(verts, d)
}

fn dist_to_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 <= 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn dist_to_polygon_boundary(p: Point2, poly: &ConvexPolygon) -> f64 {
    let n = poly.vertices.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        best = best.min(dist_to_segment(p, poly.vertices[i], poly.vertices[(i + 1) % n]));
    }
    best
}

/// Contour probability map with a unit-height ridge along the silhouette
/// boundary, fading linearly over one pixel.
pub fn render_silhouette_outline(b: &Box3D, w: u32, h: u32) -> Result<ContourMap> {
    let hull = silhouette(b)?;
    let mut data = vec![0.0f32; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let p = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
            let d = dist_to_polygon_boundary(p, &hull);
            if d < 1.0 {
                data[(y * w + x) as usize] = (1.0 - d) as f32;
            }
        }
    }
    ContourMap::new(w, h, data)
}

/// Renders each face of the box in a flat color (front/rear, side, roof in
/// that priority order), black elsewhere.
pub fn render_face_fill(b: &Box3D, w: u32, h: u32, colors: [[u8; 3]; 3]) -> Result<RgbImage> {
    let f = b.front_quad()?;
    let s = b.side_quad()?;
    let r = b.roof_quad()?;
    let mut img = RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let p = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
            let c = if point_in_quad(p, &f) {
                Some(colors[0])
            } else if point_in_quad(p, &s) {
                Some(colors[1])
            } else if point_in_quad(p, &r) {
                Some(colors[2])
            } else {
                None
            };
            if let Some(c) = c {
                img.get_pixel_mut(x, y).0 = c;
            }
        }
    }
    Ok(img)
}

/// Paints the box edge from vertex `i` to vertex `j` in white on black with
/// the given half-width in pixels.
pub fn render_edge_paint(b: &Box3D, w: u32, h: u32, i: usize, j: usize, half_width: f64) -> RgbImage {
    let a = b.vertex(i);
    let bb = b.vertex(j);
    let mut img = RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let p = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
            if dist_to_segment(p, a, bb) <= half_width {
                img.get_pixel_mut(x, y).0 = [255, 255, 255];
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_boxes_have_hexagonal_silhouettes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let s = random_cuboid(&mut rng);
            let hull = silhouette(&s.box3d).unwrap();
            assert_eq!(hull.vertices.len(), 6);
            assert!(hull.area() > crate::box3d::MIN_SILHOUETTE_AREA);
        }
    }

    #[test]
    fn inner_vertices_off_the_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_cuboid(&mut rng);
        let hull = silhouette(&s.box3d).unwrap();
        for inner in [s.box3d.vertex(1), s.box3d.vertex(7)] {
            for v in &hull.vertices {
                assert!(v.distance(inner) > 1e-6);
            }
        }
    }

    #[test]
    fn outline_map_peaks_on_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_cuboid(&mut rng);
        let map = render_silhouette_outline(&s.box3d, 512, 512).unwrap();
        let hull = silhouette(&s.box3d).unwrap();
        let v0 = hull.vertices[0];
        let val = map.sample(v0.x - 0.5, v0.y - 0.5);
        assert!(val > 0.4, "outline value at hull vertex: {val}");
    }
}
