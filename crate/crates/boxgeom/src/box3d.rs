//! The projected 3D bounding-box model.
//!
//! A vehicle's 3D bounding box is stored as its eight projected vertices
//! `b0..b7` in image coordinates plus a travel-direction flag. Vertex
//! convention:
//!
//! * `b0 b1 b2 b3` — roof quad, `b4..b7` the bottom vertices below them
//!   (`b_i` and `b_{i+4}` joined by a vertical box edge);
//! * front/rear face `b0 b1 b5 b4`, side face `b1 b2 b6 b5`, roof face
//!   `b0 b1 b2 b3`;
//! * `b1` is the corner where those three faces meet (inside the silhouette),
//!   `b7` is the hidden vertex diagonally opposite.
//!
//! Edge directions: `b0b1 ∥ u_f`, `b1b2 ∥ u_s`, `b1b5 ∥ u_r`.

use crate::error::{Error, Result};
use crate::geom::{intersect, line_through, ConvexPolygon, HomogLine, Point2, Quad};
use serde::{Deserialize, Serialize};

/// Travel direction of the vehicle relative to the camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TravelDirection {
    /// d = 0: going away from the camera (the visible end face is the rear).
    Away,
    /// d = 1: going toward the camera (the visible end face is the front).
    Toward,
}

impl TravelDirection {
    pub fn from_flag(d: u8) -> Result<Self> {
        match d {
            0 => Ok(Self::Away),
            1 => Ok(Self::Toward),
            other => Err(Error::InvalidData(format!("direction flag {other} not in {{0,1}}"))),
        }
    }

    pub fn flag(&self) -> u8 {
        match self {
            Self::Away => 0,
            Self::Toward => 1,
        }
    }

    pub fn flipped(&self) -> Self {
        match self {
            Self::Away => Self::Toward,
            Self::Toward => Self::Away,
        }
    }
}

/// Eight projected box vertices plus the travel-direction flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    b: [Point2; 8],
    d: TravelDirection,
}

/// Serialized form: 8 `[x, y]` pairs in `b0..b7` order plus integer `d`.
#[derive(Serialize, Deserialize)]
struct Box3DRepr {
    b: [[f64; 2]; 8],
    d: u8,
}

impl Serialize for Box3D {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = Box3DRepr {
            b: self.b.map(|p| [p.x, p.y]),
            d: self.d.flag(),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Box3D {
    /// Deserialization checks structure only (finite coordinates, valid d),
    /// so annotation files with geometrically degenerate boxes still load and
    /// can be *reported* by the dataset validator. Every geometric operation
    /// re-validates through the face accessors and fails with a
    /// DegenerateFace error on such boxes.
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = Box3DRepr::deserialize(d)?;
        let b = repr.b.map(|[x, y]| Point2::new(x, y));
        let dir = TravelDirection::from_flag(repr.d).map_err(serde::de::Error::custom)?;
        for (i, v) in b.iter().enumerate() {
            if !v.is_finite() {
                return Err(serde::de::Error::custom(format!("vertex b{i} not finite")));
            }
        }
        Ok(Box3D { b, d: dir })
    }
}

impl Box3D {
    /// Validates the face and diagonal invariants.
    pub fn new(b: [Point2; 8], d: TravelDirection) -> Result<Self> {
        for (i, v) in b.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidData(format!("vertex b{i} is not finite")));
            }
        }
        let boxed = Self { b, d };
        boxed.validate()?;
        Ok(boxed)
    }

    /// Re-checks the face and center invariants (used by the dataset
    /// validator on deserialized boxes).
    pub fn validate(&self) -> Result<()> {
        self.front_quad()?;
        self.side_quad()?;
        self.roof_quad()?;
        // The center must be well defined.
        let d1 = line_through(self.b[2], self.b[4])?;
        let d2 = line_through(self.b[5], self.b[3])?;
        intersect(&d1, &d2)?;
        Ok(())
    }

    pub fn vertices(&self) -> &[Point2; 8] {
        &self.b
    }

    pub fn vertex(&self, i: usize) -> Point2 {
        self.b[i]
    }

    pub fn direction(&self) -> TravelDirection {
        self.d
    }

    pub fn with_direction(&self, d: TravelDirection) -> Self {
        Self { b: self.b, d }
    }

    /// Front (or rear) face quad b0 b1 b5 b4.
    pub fn front_quad(&self) -> Result<Quad> {
        Quad::new(self.b[0], self.b[1], self.b[5], self.b[4])
            .map_err(|e| Error::DegenerateFace(format!("front/rear face: {e}")))
    }

    /// Side face quad b1 b2 b6 b5.
    pub fn side_quad(&self) -> Result<Quad> {
        Quad::new(self.b[1], self.b[2], self.b[6], self.b[5])
            .map_err(|e| Error::DegenerateFace(format!("side face: {e}")))
    }

    /// Roof face quad b0 b1 b2 b3.
    pub fn roof_quad(&self) -> Result<Quad> {
        Quad::new(self.b[0], self.b[1], self.b[2], self.b[3])
            .map_err(|e| Error::DegenerateFace(format!("roof face: {e}")))
    }

    /// Axis-aligned bounding rectangle of the eight vertices.
    pub fn bounding_rect(&self) -> crate::geom::Rect {
        let xs = self.b.iter().map(|p| p.x);
        let ys = self.b.iter().map(|p| p.y);
        let x0 = xs.clone().fold(f64::INFINITY, f64::min);
        let x1 = xs.fold(f64::NEG_INFINITY, f64::max);
        let y0 = ys.clone().fold(f64::INFINITY, f64::min);
        let y1 = ys.fold(f64::NEG_INFINITY, f64::max);
        crate::geom::Rect::new(x0, y0, x1 - x0, y1 - y0)
    }
}

/// Center of the box: intersection of the diagonals b2b4 and b5b3.
pub fn box_center(b: &Box3D) -> Result<Point2> {
    let d1 = line_through(b.vertex(2), b.vertex(4))?;
    let d2 = line_through(b.vertex(5), b.vertex(3))?;
    intersect(&d1, &d2)
}

/// Unit 2D vectors from the box center toward the face centers, plus the
/// travel-direction flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint2D {
    pub v_f: [f64; 2],
    pub v_s: [f64; 2],
    pub v_r: [f64; 2],
    pub d: u8,
}

impl Viewpoint2D {
    fn unit(v: Point2) -> Result<[f64; 2]> {
        let n = v.norm();
        if n < 1e-9 {
            return Err(Error::DegenerateFace(
                "face center coincides with the box center".into(),
            ));
        }
        Ok([v.x / n, v.y / n])
    }
}

/// View vectors: the face centers are the diagonal intersections of the
/// front/rear, side and roof quads.
pub fn view_vectors(b: &Box3D) -> Result<Viewpoint2D> {
    let c = box_center(b)?;
    let c_f = b
        .front_quad()?
        .diagonal_intersection()
        .map_err(|_| Error::DegenerateFace("front/rear diagonals parallel".into()))?;
    let c_s = b
        .side_quad()?
        .diagonal_intersection()
        .map_err(|_| Error::DegenerateFace("side diagonals parallel".into()))?;
    let c_r = b
        .roof_quad()?
        .diagonal_intersection()
        .map_err(|_| Error::DegenerateFace("roof diagonals parallel".into()))?;
    Ok(Viewpoint2D {
        v_f: Viewpoint2D::unit(c_f - c)?,
        v_s: Viewpoint2D::unit(c_s - c)?,
        v_r: Viewpoint2D::unit(c_r - c)?,
        d: b.direction().flag(),
    })
}

/// Directions toward the three vanishing points, canonicalized so each
/// vector's angle lies in [-90°, 90°).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionTriplet {
    pub u_f: Point2,
    pub u_s: Point2,
    pub u_r: Point2,
}

/// Canonical representative of an undirected direction: angle in [-90°, 90°).
pub fn canonicalize_direction(v: Point2) -> Result<Point2> {
    let n = v.norm();
    if n.is_nan() || n <= 1e-12 || !v.is_finite() {
        return Err(Error::DegenerateInput("zero direction vector".into()));
    }
    let u = Point2::new(v.x / n, v.y / n);
    if u.x > 0.0 {
        Ok(u)
    } else if u.x < 0.0 {
        Ok(Point2::new(-u.x, -u.y))
    } else {
        // Vertical: angle -90°.
        Ok(Point2::new(0.0, -1.0))
    }
}

/// Angle of a canonicalized direction in degrees, in [-90, 90).
pub fn direction_angle_deg(v: Point2) -> Result<f64> {
    let u = canonicalize_direction(v)?;
    let mut deg = u.y.atan2(u.x).to_degrees();
    if deg >= 90.0 {
        deg -= 180.0;
    }
    Ok(deg)
}

/// Separation of two undirected directions in degrees, in [0, 90].
pub fn line_angle_separation_deg(a: Point2, b: Point2) -> f64 {
    let ang = |v: Point2| v.y.atan2(v.x).to_degrees();
    let mut delta = (ang(a) - ang(b)).rem_euclid(180.0);
    if delta > 90.0 {
        delta = 180.0 - delta;
    }
    delta
}

impl DirectionTriplet {
    /// Smallest allowed pairwise angular separation in degrees.
    pub const MIN_SEPARATION_DEG: f64 = 5.0;

    pub fn new(u_f: Point2, u_s: Point2, u_r: Point2) -> Result<Self> {
        let u_f = canonicalize_direction(u_f)?;
        let u_s = canonicalize_direction(u_s)?;
        let u_r = canonicalize_direction(u_r)?;
        for (a, b) in [(u_f, u_s), (u_f, u_r), (u_s, u_r)] {
            let sep = line_angle_separation_deg(a, b);
            if sep <= Self::MIN_SEPARATION_DEG {
                return Err(Error::AmbiguousAssembly(sep));
            }
        }
        Ok(Self { u_f, u_s, u_r })
    }

    /// Builds the triplet from angles in degrees, each in [-90, 90).
    pub fn from_angles_deg(f: f64, s: f64, r: f64) -> Result<Self> {
        let dir = |deg: f64| {
            let rad = deg.to_radians();
            Point2::new(rad.cos(), rad.sin())
        };
        Self::new(dir(f), dir(s), dir(r))
    }
}

/// Pinhole calibration: principal point and focal length in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraCalib {
    pub principal: Point2,
    pub f: f64,
}

impl CameraCalib {
    pub fn new(principal: Point2, f: f64) -> Result<Self> {
        if !f.is_finite() || f <= 0.0 || !principal.is_finite() {
            return Err(Error::InvalidData(format!("invalid calibration f={f}")));
        }
        Ok(Self { principal, f })
    }
}

/// Focal length from two orthogonal finite vanishing points:
/// f = sqrt(-(u - p) . (v - p)).
pub fn focal_from_vps(u: Point2, v: Point2, principal: Point2) -> Result<f64> {
    let du = u - principal;
    let dv = v - principal;
    let dot = du.dot(dv);
    if dot >= 0.0 {
        return Err(Error::NonOrthogonalConfiguration(dot));
    }
    Ok((-dot).sqrt())
}

/// Unit camera-frame ray toward the vehicle: the box center back-projected
/// through the pinhole model.
pub fn viewpoint_3d(b: &Box3D, calib: &CameraCalib) -> Result<[f64; 3]> {
    let c = box_center(b)?;
    let v = [c.x - calib.principal.x, c.y - calib.principal.y, calib.f];
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    Ok([v[0] / n, v[1] / n, v[2] / n])
}

/// Angular distance between two unit rays, in radians. Computed from the
/// chord length, which is stable near zero and exactly zero for identical
/// rays.
pub fn ray_angle(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    let half_chord = 0.5 * (dx * dx + dy * dy + dz * dz).sqrt();
    2.0 * half_chord.clamp(0.0, 1.0).asin()
}

/// A vanishing point recovered from box edges: either a finite image point
/// or a direction (point at infinity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VanishingPoint {
    Finite(Point2),
    AtInfinity(Point2),
}

impl VanishingPoint {
    /// Undirected image direction toward the vanishing point as seen from
    /// `origin`.
    pub fn direction_from(&self, origin: Point2) -> Result<Point2> {
        match self {
            Self::Finite(p) => {
                let v = *p - origin;
                if v.norm() < 1.0 {
                    return Err(Error::VPAtCenter);
                }
                canonicalize_direction(v)
            }
            Self::AtInfinity(dir) => canonicalize_direction(*dir),
        }
    }
}

fn vp_from_edge_pair(p0: Point2, p1: Point2, q0: Point2, q1: Point2) -> Result<VanishingPoint> {
    let l1 = line_through(p0, p1)?;
    let l2 = line_through(q0, q1)?;
    let det = l1.a * l2.b - l2.a * l1.b;
    if det.abs() < 1e-6 {
        return Ok(VanishingPoint::AtInfinity(l1.direction()));
    }
    Ok(VanishingPoint::Finite(intersect(&l1, &l2)?))
}

/// The three vanishing points implied by the box edges, in (f, s, r) order.
pub fn vanishing_points_from_box(b: &Box3D) -> Result<[VanishingPoint; 3]> {
    let v = b.vertices();
    let vp_f = vp_from_edge_pair(v[0], v[1], v[4], v[5])?;
    let vp_s = vp_from_edge_pair(v[1], v[2], v[5], v[6])?;
    let vp_r = vp_from_edge_pair(v[0], v[4], v[2], v[6])?;
    Ok([vp_f, vp_s, vp_r])
}

/// Calibration from the box's own vanishing points: the principal point is
/// given (image center by default) and the focal length comes from the first
/// finite, orthogonally-configured VP pair.
pub fn calib_from_box(b: &Box3D, principal: Point2) -> Result<CameraCalib> {
    let vps = vanishing_points_from_box(b)?;
    let finite = |vp: &VanishingPoint| match vp {
        VanishingPoint::Finite(p) => Some(*p),
        VanishingPoint::AtInfinity(_) => None,
    };
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        if let (Some(u), Some(v)) = (finite(&vps[i]), finite(&vps[j])) {
            if let Ok(f) = focal_from_vps(u, v, principal) {
                return CameraCalib::new(principal, f);
            }
        }
    }
    Err(Error::InsufficientData(
        "no finite orthogonal vanishing-point pair".into(),
    ))
}

fn ray_to(vp: &VanishingPoint, calib: &CameraCalib) -> [f64; 3] {
    let v = match vp {
        VanishingPoint::Finite(p) => [
            p.x - calib.principal.x,
            p.y - calib.principal.y,
            calib.f,
        ],
        VanishingPoint::AtInfinity(dir) => [dir.x, dir.y, 0.0],
    };
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// Azimuth (0° = frontal, [0, 360)) and elevation ([0, 90]) of the viewing
/// ray toward the vehicle, both in degrees.
///
/// The vertical axis comes from the box's vertical-edge vanishing point and
/// the vehicle's long axis from the side-edge vanishing point, oriented by
/// the travel-direction flag.
pub fn viewpoint_azimuth_elevation(b: &Box3D, calib: &CameraCalib) -> Result<(f64, f64)> {
    let w = viewpoint_3d(b, calib)?;
    let vps = vanishing_points_from_box(b)?;
    // Vertical axis, oriented toward image-up (negative camera y).
    let mut z_up = ray_to(&vps[2], calib);
    if z_up[1] > 0.0 {
        z_up = scale3(z_up, -1.0);
    }
    // Vehicle forward axis: the side face's edge direction, oriented so a
    // vehicle moving toward the camera faces it.
    let mut fwd = ray_to(&vps[1], calib);
    let toward = b.direction() == TravelDirection::Toward;
    if (toward && dot3(fwd, w) > 0.0) || (!toward && dot3(fwd, w) < 0.0) {
        fwd = scale3(fwd, -1.0);
    }
    let elevation = (-dot3(w, z_up)).clamp(-1.0, 1.0).asin().to_degrees();

    let w_g = sub3(w, scale3(z_up, dot3(w, z_up)));
    let f_g = sub3(fwd, scale3(z_up, dot3(fwd, z_up)));
    if norm3(w_g) < 1e-9 || norm3(f_g) < 1e-9 {
        return Err(Error::DegenerateInput(
            "viewing ray or forward axis parallel to the vertical axis".into(),
        ));
    }
    let back = scale3(w_g, -1.0);
    let az = dot3(cross3(back, f_g), z_up)
        .atan2(dot3(back, f_g))
        .to_degrees()
        .rem_euclid(360.0);
    Ok((az, elevation))
}

struct SupportStrip {
    /// Unit normal of the direction (perpendicular to it).
    normal: Point2,
    min: f64,
    max: f64,
}

impl SupportStrip {
    fn from_hull(hull: &ConvexPolygon, dir: Point2) -> Self {
        let normal = dir.perp();
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in &hull.vertices {
            let o = normal.dot(v);
            min = min.min(o);
            max = max.max(o);
        }
        Self { normal, min, max }
    }

    fn line(&self, offset: f64) -> HomogLine {
        // normal . p = offset
        HomogLine {
            a: self.normal.x,
            b: self.normal.y,
            c: -offset,
        }
    }

    fn contains(&self, p: Point2, tol: f64) -> bool {
        let o = self.normal.dot(p);
        o > self.min + tol && o < self.max - tol
    }

    fn offset_of(&self, p: Point2) -> f64 {
        self.normal.dot(p)
    }
}

/// Hexagon corners where a supporting line of `a` meets one of `b`, filtered
/// to lie strictly inside the third strip.
fn corner_pair(a: &SupportStrip, b: &SupportStrip, third: &SupportStrip, tol: f64) -> Result<[Point2; 2]> {
    let mut found: Vec<Point2> = Vec::with_capacity(2);
    for ao in [a.min, a.max] {
        for bo in [b.min, b.max] {
            let p = intersect(&a.line(ao), &b.line(bo)).map_err(|_| {
                Error::DegenerateSilhouette("supporting lines nearly parallel".into())
            })?;
            if third.contains(p, tol) {
                found.push(p);
            }
        }
    }
    if found.len() != 2 {
        return Err(Error::DegenerateSilhouette(format!(
            "expected 2 silhouette corners, found {}",
            found.len()
        )));
    }
    Ok([found[0], found[1]])
}

/// Minimum silhouette area in square pixels.
pub const MIN_SILHOUETTE_AREA: f64 = 9.0;

/// Constructs the projected 3D bounding box of a convex silhouette given the
/// three edge directions (vanishing points at infinity).
///
/// Each direction contributes its two supporting lines of the hull; the six
/// lines bound the silhouette hexagon whose corners are the outer box
/// vertices. The inner visible vertex b1 and the hidden vertex b7 are cast
/// from the outer corners along the edge directions.
pub fn construct_box(
    hull: &ConvexPolygon,
    dirs: &DirectionTriplet,
    d: TravelDirection,
) -> Result<Box3D> {
    if hull.area() < MIN_SILHOUETTE_AREA {
        return Err(Error::DegenerateSilhouette(format!(
            "hull area {:.2} px^2 below {MIN_SILHOUETTE_AREA}",
            hull.area()
        )));
    }
    let strip_f = SupportStrip::from_hull(hull, dirs.u_f);
    let strip_s = SupportStrip::from_hull(hull, dirs.u_s);
    let strip_r = SupportStrip::from_hull(hull, dirs.u_r);

    let scale = hull
        .vertices
        .iter()
        .map(|v| v.norm())
        .fold(1.0f64, f64::max);
    let tol = 1e-9 * scale;

    // Corner types: (f,s) -> {b5, b3}, (f,r) -> {b4, b2}, (s,r) -> {b6, b0}.
    let fs = corner_pair(&strip_f, &strip_s, &strip_r, tol)?;
    let fr = corner_pair(&strip_f, &strip_r, &strip_s, tol)?;
    let sr = corner_pair(&strip_s, &strip_r, &strip_f, tol)?;

    // b5 is the bottom-near corner: larger image y of the two (f,s) corners.
    let (b5, b3) = if fs[0].y > fs[1].y {
        (fs[0], fs[1])
    } else if fs[1].y > fs[0].y {
        (fs[1], fs[0])
    } else {
        return Err(Error::DegenerateSilhouette(
            "silhouette has no vertical extent".into(),
        ));
    };

    // b4 shares b5's f-supporting line, b6 shares its s-supporting line;
    // b2 and b0 are their opposite corners.
    let same_offset = |strip: &SupportStrip, p: Point2, q: Point2| {
        (strip.offset_of(p) - strip.offset_of(q)).abs() < 1e-6 * scale.max(1.0)
    };
    let (b4, b2) = if same_offset(&strip_f, fr[0], b5) {
        (fr[0], fr[1])
    } else {
        (fr[1], fr[0])
    };
    let (b6, b0) = if same_offset(&strip_s, sr[0], b5) {
        (sr[0], sr[1])
    } else {
        (sr[1], sr[0])
    };

    // Inner visible vertex and hidden vertex, cast along edge directions.
    let b1 = intersect(
        &HomogLine::from_point_dir(b0, dirs.u_f)?,
        &HomogLine::from_point_dir(b2, dirs.u_s)?,
    )
    .map_err(|_| Error::DegenerateSilhouette("inner vertex undefined".into()))?;
    let b7 = intersect(
        &HomogLine::from_point_dir(b3, dirs.u_r)?,
        &HomogLine::from_point_dir(b4, dirs.u_s)?,
    )
    .map_err(|_| Error::DegenerateSilhouette("hidden vertex undefined".into()))?;

    let verts = [b0, b1, b2, b3, b4, b5, b6, b7];
    for i in 0..8 {
        for j in (i + 1)..8 {
            if verts[i].distance(verts[j]) < 1e-6 * scale.max(1.0) {
                return Err(Error::DegenerateSilhouette(format!(
                    "vertices b{i} and b{j} coincide"
                )));
            }
        }
    }
    Box3D::new(verts, d)
}
