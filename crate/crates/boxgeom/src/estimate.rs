//! Single-image 3D bounding-box estimation: contour extraction from a
//! probability map, vanishing-point direction bin coding, ground-truth
//! direction generation, and assembly into an estimated box.

use crate::box3d::{
    construct_box, direction_angle_deg, vanishing_points_from_box, Box3D, DirectionTriplet,
    TravelDirection, VanishingPoint,
};
use crate::error::{Error, Result};
use crate::geom::{convex_hull, Point2, Rect};
use serde::{Deserialize, Serialize};

/// Number of direction bins per vanishing point.
pub const NUM_BINS: usize = 60;
/// Width of one bin in degrees.
pub const BIN_WIDTH_DEG: f64 = 3.0;
/// Default acceptance threshold for contour responses.
pub const DEFAULT_CONTOUR_THRESHOLD: f32 = 0.1;
/// Minimum surviving rays for a usable contour.
pub const MIN_CONTOUR_POINTS: usize = 8;

/// Per-pixel vehicle-contour probabilities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ContourMap {
    w: u32,
    h: u32,
    data: Vec<f32>,
}

impl ContourMap {
    pub fn new(w: u32, h: u32, mut data: Vec<f32>) -> Result<Self> {
        if data.len() != (w as usize) * (h as usize) {
            return Err(Error::InvalidData(format!(
                "contour map data length {} != {}x{}",
                data.len(),
                w,
                h
            )));
        }
        for v in data.iter_mut() {
            if !v.is_finite() {
                return Err(Error::InvalidData("non-finite contour probability".into()));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self { w, h, data })
    }

    pub fn width(&self) -> u32 {
        self.w
    }

    pub fn height(&self) -> u32 {
        self.h
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[(y * self.w + x) as usize]
    }

    /// Bilinear sample at a continuous pixel-index position; outside
    /// contributions are zero.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let mut acc = 0.0f64;
        for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
            for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
                let px = x0 as i64 + dx;
                let py = y0 as i64 + dy;
                let wgt = wx * wy;
                if wgt == 0.0 || px < 0 || py < 0 || px >= self.w as i64 || py >= self.h as i64 {
                    continue;
                }
                acc += wgt * self.data[(py as u32 * self.w + px as u32) as usize] as f64;
            }
        }
        acc
    }

    /// Loads from an 8- or 16-bit grayscale PNG, value/maximum = probability.
    pub fn load_png(path: &std::path::Path) -> Result<Self> {
        let dyn_img = image::open(path)?;
        match dyn_img {
            image::DynamicImage::ImageLuma16(img) => {
                let (w, h) = img.dimensions();
                let data = img.pixels().map(|p| p.0[0] as f32 / 65535.0).collect();
                Self::new(w, h, data)
            }
            other => {
                let img = other.to_luma8();
                let (w, h) = img.dimensions();
                let data = img.pixels().map(|p| p.0[0] as f32 / 255.0).collect();
                Self::new(w, h, data)
            }
        }
    }
}

/// Contour points in 2D-bbox perimeter-traversal order.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourPolygon {
    pub points: Vec<Point2>,
    pub bbox: Rect,
}

/// Integer perimeter pixels of a rectangle, clockwise from the top-left
/// corner, corners visited once.
fn perimeter_pixels(bbox: &Rect) -> Vec<(u32, u32)> {
    let x0 = bbox.x.round().max(0.0) as u32;
    let y0 = bbox.y.round().max(0.0) as u32;
    let x1 = (bbox.x + bbox.w).round() as u32;
    let y1 = (bbox.y + bbox.h).round() as u32;
    let x1 = x1.max(x0 + 1) - 1;
    let y1 = y1.max(y0 + 1) - 1;
    let mut pts = Vec::new();
    for x in x0..=x1 {
        pts.push((x, y0));
    }
    for y in (y0 + 1)..=y1 {
        pts.push((x1, y));
    }
    if y1 > y0 {
        for x in (x0..x1).rev() {
            pts.push((x, y1));
        }
    }
    if x1 > x0 {
        for y in ((y0 + 1)..y1).rev() {
            pts.push((x0, y));
        }
    }
    pts
}

/// Searches for the global maximum of the map along every segment from the
/// bbox center to a perimeter pixel (0.5 px stepping, bilinear samples) and
/// keeps maxima reaching `threshold`.
pub fn extract_contour(
    map: &ContourMap,
    bbox2d: Rect,
    threshold: f32,
) -> Result<ContourPolygon> {
    let extent = Rect::new(0.0, 0.0, map.width() as f64, map.height() as f64);
    if !extent.contains_rect(&bbox2d) {
        return Err(Error::InvalidData(format!(
            "bbox ({}, {}, {}, {}) outside map extent {}x{}",
            bbox2d.x,
            bbox2d.y,
            bbox2d.w,
            bbox2d.h,
            map.width(),
            map.height()
        )));
    }
    if bbox2d.area() < 64.0 {
        return Err(Error::InvalidData(format!(
            "bbox area {} px^2 below 64",
            bbox2d.area()
        )));
    }
    let center = bbox2d.center();
    let mut points = Vec::new();
    for (ex, ey) in perimeter_pixels(&bbox2d) {
        let end = Point2::new(ex as f64 + 0.5, ey as f64 + 0.5);
        let ray = end - center;
        let len = ray.norm();
        if len < 0.5 {
            continue;
        }
        let steps = (len / 0.5).ceil() as usize;
        let mut best_val = f64::NEG_INFINITY;
        let mut best_point = center;
        for k in 0..=steps {
            let t = (k as f64 / steps as f64) * len;
            let p = center + ray * (t / len);
            let v = map.sample(p.x - 0.5, p.y - 0.5);
            if v > best_val {
                best_val = v;
                best_point = p;
            }
        }
        if best_val >= threshold as f64 {
            points.push(best_point);
        }
    }
    if points.len() < MIN_CONTOUR_POINTS {
        return Err(Error::EmptyContour(points.len()));
    }
    Ok(ContourPolygon { points, bbox: bbox2d })
}

/// Per-vanishing-point probabilities over the 60 direction bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionBins {
    pub probs: [Vec<f64>; 3],
}

impl DirectionBins {
    pub fn new(probs: [Vec<f64>; 3]) -> Result<Self> {
        for row in &probs {
            if row.len() != NUM_BINS {
                return Err(Error::InvalidData(format!(
                    "bin row length {} != {NUM_BINS}",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for &v in row {
                if v.is_nan() || v < 0.0 {
                    return Err(Error::InvalidData(format!("negative bin probability {v}")));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidData(format!(
                    "bin row sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { probs })
    }

    /// Decodes all three rows into an angle triple.
    pub fn decode(&self) -> Result<AngleTriple> {
        AngleTriple::new(
            decode_bins(&self.probs[0]),
            decode_bins(&self.probs[1]),
            decode_bins(&self.probs[2]),
        )
    }
}

/// Angles toward the three vanishing points, degrees in [-90, 90).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleTriple {
    pub theta_f: f64,
    pub theta_s: f64,
    pub theta_r: f64,
}

impl AngleTriple {
    pub fn new(theta_f: f64, theta_s: f64, theta_r: f64) -> Result<Self> {
        for t in [theta_f, theta_s, theta_r] {
            if !(-90.0..90.0).contains(&t) {
                return Err(Error::OutOfRange(t));
            }
        }
        // Pairwise separation is enforced by the triplet constructor.
        DirectionTriplet::from_angles_deg(theta_f, theta_s, theta_r)?;
        Ok(Self { theta_f, theta_s, theta_r })
    }

    pub fn to_triplet(&self) -> Result<DirectionTriplet> {
        DirectionTriplet::from_angles_deg(self.theta_f, self.theta_s, self.theta_r)
    }
}

/// Bin index of an angle: bins of 3° tiling [-90, 90).
pub fn encode_angle(theta_deg: f64) -> Result<usize> {
    if !(-90.0..90.0).contains(&theta_deg) {
        return Err(Error::OutOfRange(theta_deg));
    }
    let idx = ((theta_deg + 90.0) / BIN_WIDTH_DEG).floor() as usize;
    Ok(idx.min(NUM_BINS - 1))
}

/// Center angle of a bin in degrees.
pub fn bin_center(idx: usize) -> f64 {
    -90.0 + BIN_WIDTH_DEG * idx as f64 + BIN_WIDTH_DEG / 2.0
}

/// Decodes a 60-bin probability row into an angle: soft-argmax over the five
/// bins centered on the argmax, falling back to the argmax center within two
/// bins of either boundary.
pub fn decode_bins(row: &[f64]) -> f64 {
    debug_assert_eq!(row.len(), NUM_BINS);
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    if !(2..=NUM_BINS - 3).contains(&best) {
        return bin_center(best);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &w) in row.iter().enumerate().take(best + 3).skip(best - 2) {
        num += w * bin_center(i);
        den += w;
    }
    if den <= 0.0 {
        return bin_center(best);
    }
    num / den
}

/// Directed input for ground-truth direction generation: either the three
/// annotated vanishing points or a box whose edges imply them.
pub enum GtSource<'a> {
    VanishingPoints([Point2; 3]),
    Box3D(&'a Box3D),
}

/// Angle of the line from the bbox center toward one vanishing point,
/// canonicalized to [-90, 90).
fn vp_angle(vp: &VanishingPoint, center: Point2) -> Result<f64> {
    let dir = vp.direction_from(center)?;
    direction_angle_deg(dir)
}

/// Ground-truth direction angles for the three vanishing points as seen from
/// the 2D bounding-box center.
pub fn gt_directions(source: GtSource<'_>, bbox2d: Rect) -> Result<AngleTriple> {
    let center = bbox2d.center();
    let vps: [VanishingPoint; 3] = match source {
        GtSource::VanishingPoints(p) => p.map(VanishingPoint::Finite),
        GtSource::Box3D(b) => vanishing_points_from_box(b)?,
    };
    AngleTriple::new(
        vp_angle(&vps[0], center)?,
        vp_angle(&vps[1], center)?,
        vp_angle(&vps[2], center)?,
    )
}

/// Full estimation pipeline: contour extraction, convex hull, and box
/// construction from the direction angles.
pub fn estimate_box(
    map: &ContourMap,
    bbox2d: Rect,
    angles: &AngleTriple,
    d: TravelDirection,
) -> Result<Box3D> {
    estimate_box_with_threshold(map, bbox2d, angles, d, DEFAULT_CONTOUR_THRESHOLD)
}

pub fn estimate_box_with_threshold(
    map: &ContourMap,
    bbox2d: Rect,
    angles: &AngleTriple,
    d: TravelDirection,
    threshold: f32,
) -> Result<Box3D> {
    let contour = extract_contour(map, bbox2d, threshold)?;
    let hull = convex_hull(&contour.points)?;
    let dirs = angles.to_triplet()?;
    construct_box(&hull, &dirs, d)
}
