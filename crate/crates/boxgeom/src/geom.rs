//! Homogeneous 2D geometry: points, lines, homographies, quads and
//! perspective warping.
//!
//! Image coordinate convention throughout the crate: origin at the top-left
//! corner, x to the right, y down. All operations here are pure functions
//! over immutable values.

use crate::error::{Error, Result};
use image::RgbImage;
use serde::{Deserialize, Serialize};

/// Minimum distance between two points for them to define a line.
pub const POINT_EPS: f64 = 1e-9;
/// Minimum |sin| of the angle between two lines for them to intersect.
pub const PARALLEL_EPS: f64 = 1e-9;

/// A 2D point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(&self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product of the two vectors.
    pub fn cross(&self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(&self) -> Point2 {
        let n = self.norm();
        Point2::new(self.x / n, self.y / n)
    }

    /// Counter-clockwise perpendicular (in y-down image coordinates this
    /// turns a direction into its left normal).
    pub fn perp(&self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn distance(&self, other: Point2) -> f64 {
        (*self - other).norm()
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// A line ax + by + c = 0 with the normal (a, b) stored at unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogLine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HomogLine {
    /// Builds a line from raw coefficients, normalizing so a^2 + b^2 = 1.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let n = a.hypot(b);
        if n.is_nan() || n <= POINT_EPS || !n.is_finite() {
            return Err(Error::DegenerateInput(
                "line coefficients (a, b) are (0, 0)".into(),
            ));
        }
        Ok(Self {
            a: a / n,
            b: b / n,
            c: c / n,
        })
    }

    /// Signed distance of a point from the line.
    pub fn signed_distance(&self, p: Point2) -> f64 {
        self.a * p.x + self.b * p.y + self.c
    }

    /// Unit direction vector along the line.
    pub fn direction(&self) -> Point2 {
        Point2::new(-self.b, self.a)
    }

    /// Line through `p` with direction `dir`.
    pub fn from_point_dir(p: Point2, dir: Point2) -> Result<Self> {
        line_through(p, p + dir)
    }
}

/// Line through two distinct points.
pub fn line_through(p: Point2, q: Point2) -> Result<HomogLine> {
    if p.distance(q) <= POINT_EPS {
        return Err(Error::DegenerateInput(format!(
            "points ({}, {}) and ({}, {}) coincide",
            p.x, p.y, q.x, q.y
        )));
    }
    let a = p.y - q.y;
    let b = q.x - p.x;
    let c = -(a * p.x + b * p.y);
    HomogLine::new(a, b, c)
}

/// Intersection of two non-parallel lines.
pub fn intersect(l1: &HomogLine, l2: &HomogLine) -> Result<Point2> {
    // Both normals are unit, so the determinant is sin of the angle.
    let det = l1.a * l2.b - l2.a * l1.b;
    if det.abs() < PARALLEL_EPS {
        return Err(Error::ParallelLines);
    }
    let x = (l1.b * l2.c - l2.b * l1.c) / det;
    let y = (l2.a * l1.c - l1.a * l2.c) / det;
    Ok(Point2::new(x, y))
}

/// A convex quadrilateral in consistent winding order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub p: [Point2; 4],
}

impl Quad {
    /// Validates convexity and non-degeneracy.
    pub fn new(p0: Point2, p1: Point2, p2: Point2, p3: Point2) -> Result<Self> {
        let p = [p0, p1, p2, p3];
        for v in &p {
            if !v.is_finite() {
                return Err(Error::DegenerateQuad("non-finite corner".into()));
            }
        }
        let mut sign = 0.0f64;
        for i in 0..4 {
            let a = p[i];
            let b = p[(i + 1) % 4];
            let c = p[(i + 2) % 4];
            let cr = (b - a).cross(c - b);
            if cr == 0.0 {
                return Err(Error::DegenerateQuad(format!(
                    "collinear corners at index {i}"
                )));
            }
            if sign == 0.0 {
                sign = cr.signum();
            } else if cr.signum() != sign {
                return Err(Error::DegenerateQuad("corners are not convex".into()));
            }
        }
        let quad = Self { p };
        if quad.area() <= 0.0 {
            return Err(Error::DegenerateQuad("zero area".into()));
        }
        Ok(quad)
    }

    pub fn area(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            let a = self.p[i];
            let b = self.p[(i + 1) % 4];
            s += a.cross(b);
        }
        s.abs() * 0.5
    }

    /// Intersection of the two diagonals p0p2 and p1p3.
    pub fn diagonal_intersection(&self) -> Result<Point2> {
        let d1 = line_through(self.p[0], self.p[2])?;
        let d2 = line_through(self.p[1], self.p[3])?;
        intersect(&d1, &d2)
    }

    /// Axis-aligned rectangle as a quad, corners in TL, TR, BR, BL order.
    pub fn from_rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        )
    }
}

/// An axis-aligned rectangle (x, y are the top-left corner).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.x + self.w * 0.5, self.y + self.h * 0.5)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x + other.w <= self.x + self.w
            && other.y + other.h <= self.y + self.h
    }

    pub fn contains_point(&self, p: Point2) -> bool {
        p.x >= self.x && p.x <= self.x + self.w && p.y >= self.y && p.y <= self.y + self.h
    }
}

/// A convex polygon, vertices in traversal order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    pub vertices: Vec<Point2>,
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegenerateInput(format!(
                "polygon needs >= 3 vertices, got {}",
                vertices.len()
            )));
        }
        let poly = Self { vertices };
        if poly.area() <= 0.0 {
            return Err(Error::DegenerateInput("polygon has zero area".into()));
        }
        Ok(poly)
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let mut s = 0.0;
        for i in 0..n {
            s += self.vertices[i].cross(self.vertices[(i + 1) % n]);
        }
        s.abs() * 0.5
    }
}

/// Convex hull of a point set (monotone chain). Returns vertices in
/// counter-clockwise order for y-down coordinates.
pub fn convex_hull(points: &[Point2]) -> Result<ConvexPolygon> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "hull needs >= 3 points, got {}",
            points.len()
        )));
    }
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|p, q| {
        p.x.partial_cmp(&q.x)
            .unwrap()
            .then(p.y.partial_cmp(&q.y).unwrap())
    });
    pts.dedup_by(|a, b| a.distance(*b) < 1e-12);

    let n = pts.len();
    if n < 3 {
        return Err(Error::DegenerateInput("fewer than 3 distinct points".into()));
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * n);
    for &p in pts.iter() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            if (b - a).cross(p - a) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev() {
        while hull.len() >= lower_len {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            if (b - a).cross(p - a) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull.pop();
    ConvexPolygon::new(hull)
}

/// A 3x3 projective transform of the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    pub m: [[f64; 3]; 3],
}

impl Homography {
    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]],
        }
    }

    /// Builds from a raw matrix, normalizing m[2][2] to 1 when possible and
    /// rejecting singular matrices.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self> {
        let mut h = Self { m };
        let w = h.m[2][2];
        if w.is_finite() && w.abs() > 1e-12 {
            for r in 0..3 {
                for c in 0..3 {
                    h.m[r][c] /= w;
                }
            }
        }
        if h.det().abs() <= 1e-12 {
            return Err(Error::SingularHomography);
        }
        Ok(h)
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Applies the transform; returns `None` for points mapped to infinity.
    pub fn apply(&self, p: Point2) -> Option<Point2> {
        let m = &self.m;
        let x = m[0][0] * p.x + m[0][1] * p.y + m[0][2];
        let y = m[1][0] * p.x + m[1][1] * p.y + m[1][2];
        let w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
        if w.abs() < 1e-12 {
            return None;
        }
        Some(Point2::new(x / w, y / w))
    }

    pub fn inverse(&self) -> Result<Homography> {
        let m = &self.m;
        let det = self.det();
        if det.abs() <= 1e-12 {
            return Err(Error::SingularHomography);
        }
        let inv = [
            [
                (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det,
                (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det,
                (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det,
            ],
            [
                (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det,
                (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det,
                (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det,
            ],
            [
                (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det,
                (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det,
                (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det,
            ],
        ];
        Homography::from_matrix(inv)
    }

    /// Composition: (a * b).apply(p) == a.apply(b.apply(p)).
    pub fn compose(&self, other: &Homography) -> Result<Homography> {
        let mut m = [[0.0f64; 3]; 3];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                for k in 0..3 {
                    *cell += self.m[r][k] * other.m[k][c];
                }
            }
        }
        Homography::from_matrix(m)
    }
}

fn collinear_triple(p: &[Point2; 4]) -> bool {
    for i in 0..4 {
        for j in (i + 1)..4 {
            for k in (j + 1)..4 {
                let cr = (p[j] - p[i]).cross(p[k] - p[i]);
                let scale = p[j].distance(p[i]).max(p[k].distance(p[i])).max(1.0);
                if cr.abs() < 1e-9 * scale * scale {
                    return true;
                }
            }
        }
    }
    false
}

/// Similarity transform placing the centroid at the origin with unit RMS
/// radius, used to condition the linear solve.
fn normalizing_transform(p: &[Point2; 4]) -> Homography {
    let cx = p.iter().map(|v| v.x).sum::<f64>() / 4.0;
    let cy = p.iter().map(|v| v.y).sum::<f64>() / 4.0;
    let rms = (p
        .iter()
        .map(|v| (v.x - cx).powi(2) + (v.y - cy).powi(2))
        .sum::<f64>()
        / 4.0)
        .sqrt();
    let s = if rms > 1e-12 { 1.0 / rms } else { 1.0 };
    Homography {
        m: [[s, 0.0, -s * cx], [0.0, s, -s * cy], [0.0, 0.0, 1.0]],
    }
}

/// Homography mapping the corners of `src` onto those of `dst`
/// (4-correspondence direct linear solve on normalized coordinates).
pub fn homography_from_quads(src: &Quad, dst: &Quad) -> Result<Homography> {
    if collinear_triple(&src.p) || collinear_triple(&dst.p) {
        return Err(Error::DegenerateQuad(
            "collinear triple among corners".into(),
        ));
    }
    let t_src = normalizing_transform(&src.p);
    let t_dst = normalizing_transform(&dst.p);

    let mut a = [[0.0f64; 9]; 8];
    for i in 0..4 {
        let s = t_src.apply(src.p[i]).ok_or(Error::SingularHomography)?;
        let d = t_dst.apply(dst.p[i]).ok_or(Error::SingularHomography)?;
        let r0 = 2 * i;
        a[r0][0] = s.x;
        a[r0][1] = s.y;
        a[r0][2] = 1.0;
        a[r0][6] = -s.x * d.x;
        a[r0][7] = -s.y * d.x;
        a[r0][8] = d.x;
        let r1 = 2 * i + 1;
        a[r1][3] = s.x;
        a[r1][4] = s.y;
        a[r1][5] = 1.0;
        a[r1][6] = -s.x * d.y;
        a[r1][7] = -s.y * d.y;
        a[r1][8] = d.y;
    }

    // Gaussian elimination with partial pivoting on the 8x9 system.
    for col in 0..8 {
        let mut max_val = a[col][col].abs();
        let mut max_row = col;
        for (row, arow) in a.iter().enumerate().skip(col + 1) {
            if arow[col].abs() > max_val {
                max_val = arow[col].abs();
                max_row = row;
            }
        }
        if max_val < 1e-12 {
            return Err(Error::DegenerateQuad("singular linear system".into()));
        }
        a.swap(col, max_row);
        let pivot_row = a[col];
        for row in a.iter_mut().skip(col + 1) {
            let f = row[col] / pivot_row[col];
            for (cell, &pv) in row.iter_mut().zip(&pivot_row).skip(col) {
                *cell -= f * pv;
            }
        }
    }
    let mut h = [0.0f64; 9];
    h[8] = 1.0;
    for row in (0..8).rev() {
        let mut sum = a[row][8];
        for c in (row + 1)..8 {
            sum -= a[row][c] * h[c];
        }
        h[row] = sum / a[row][row];
    }
    let hn = Homography::from_matrix([
        [h[0], h[1], h[2]],
        [h[3], h[4], h[5]],
        [h[6], h[7], h[8]],
    ])?;
    // Undo the normalization: H = T_dst^-1 * Hn * T_src.
    t_dst.inverse()?.compose(&hn)?.compose(&t_src)
}

/// Bilinear sample of an RGB image at a continuous pixel-index position.
/// Out-of-bounds contributions are black.
pub fn sample_bilinear_rgb(img: &RgbImage, x: f64, y: f64) -> [f64; 3] {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let mut out = [0.0f64; 3];
    for (dy, wy) in [(0i64, 1.0 - fy), (1i64, fy)] {
        for (dx, wx) in [(0i64, 1.0 - fx), (1i64, fx)] {
            let px = x0 as i64 + dx;
            let py = y0 as i64 + dy;
            let wgt = wx * wy;
            if wgt == 0.0 || px < 0 || py < 0 || px >= w || py >= h {
                continue;
            }
            let p = img.get_pixel(px as u32, py as u32);
            for (acc, &v) in out.iter_mut().zip(&p.0) {
                *acc += wgt * v as f64;
            }
        }
    }
    out
}

/// Warps an image with homography `h` (source -> destination mapping).
///
/// Output pixel centers are pulled back through the inverse transform and
/// sampled bilinearly; samples outside the source are black.
pub fn warp_perspective(img: &RgbImage, h: &Homography, out_w: u32, out_h: u32) -> Result<RgbImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::DegenerateInput("zero output size".into()));
    }
    let inv = h.inverse()?;
    let mut out = RgbImage::new(out_w, out_h);
    for v in 0..out_h {
        for u in 0..out_w {
            let dst = Point2::new(u as f64 + 0.5, v as f64 + 0.5);
            if let Some(src) = inv.apply(dst) {
                let rgb = sample_bilinear_rgb(img, src.x - 0.5, src.y - 0.5);
                let px = out.get_pixel_mut(u, v);
                for (dst_c, &v) in px.0.iter_mut().zip(&rgb) {
                    *dst_c = v.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    }
    Ok(out)
}
