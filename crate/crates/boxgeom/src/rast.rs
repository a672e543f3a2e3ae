//! Rasterized 3D bounding box: a 4-channel binary mask with the front, rear,
//! side and roof faces in separate channels, cropped by the vehicle's 2D
//! bounding box.

use crate::box3d::{Box3D, TravelDirection};
use crate::error::{Error, Result};
use crate::geom::{Point2, Quad, Rect};
use image::RgbaImage;

/// Channel indices of the mask.
pub const CH_FRONT: usize = 0;
pub const CH_REAR: usize = 1;
pub const CH_SIDE: usize = 2;
pub const CH_ROOF: usize = 3;

/// Point-in-convex-quad test counting the boundary as inside (signed-area
/// test against all four edges with consistent winding).
pub fn point_in_quad(p: Point2, q: &Quad) -> bool {
    let mut pos = false;
    let mut neg = false;
    for i in 0..4 {
        let a = q.p[i];
        let b = q.p[(i + 1) % 4];
        let cr = (b - a).cross(p - a);
        if cr > 0.0 {
            pos = true;
        } else if cr < 0.0 {
            neg = true;
        }
        if pos && neg {
            return false;
        }
    }
    true
}

/// 4-channel binary mask of the rasterized box faces.
#[derive(Debug, Clone, PartialEq)]
pub struct RastMask {
    pub w: u32,
    pub h: u32,
    /// Row-major h x w x 4, values 0 or 1.
    pub data: Vec<u8>,
    /// The 2D bounding box the mask was cropped by.
    pub crop: Rect,
}

impl RastMask {
    pub fn channels(&self, x: u32, y: u32) -> [u8; 4] {
        let i = ((y * self.w + x) * 4) as usize;
        [self.data[i], self.data[i + 1], self.data[i + 2], self.data[i + 3]]
    }

    /// Encodes the mask as an 8-bit RGBA image with values 0/255, channel
    /// order front, rear, side, roof.
    pub fn to_rgba(&self) -> RgbaImage {
        let mut img = RgbaImage::new(self.w, self.h);
        for y in 0..self.h {
            for x in 0..self.w {
                let c = self.channels(x, y);
                img.get_pixel_mut(x, y).0 = c.map(|v| v * 255);
            }
        }
        img
    }

    pub fn from_rgba(img: &RgbaImage, crop: Rect) -> Result<Self> {
        let (w, h) = img.dimensions();
        let mut data = Vec::with_capacity((w * h * 4) as usize);
        for y in 0..h {
            for x in 0..w {
                for v in img.get_pixel(x, y).0 {
                    match v {
                        0 => data.push(0),
                        255 => data.push(1),
                        other => {
                            return Err(Error::InvalidData(format!(
                                "mask value {other} is neither 0 nor 255"
                            )))
                        }
                    }
                }
            }
        }
        Ok(Self { w, h, data, crop })
    }
}

/// Rasterizes the box faces into an `out_w` x `out_h` mask. Output pixel
/// centers are mapped affinely onto `bbox2d`; face membership follows the
/// case order front/rear, side, roof (first match wins on shared edges).
pub fn rasterize(b: &Box3D, bbox2d: Rect, out_w: u32, out_h: u32) -> Result<RastMask> {
    if bbox2d.area() <= 0.0 {
        return Err(Error::InvalidData("2D bbox has zero area".into()));
    }
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidData("zero mask size".into()));
    }
    let front = b.front_quad()?;
    let side = b.side_quad()?;
    let roof = b.roof_quad()?;
    let end_channel = match b.direction() {
        TravelDirection::Toward => CH_FRONT,
        TravelDirection::Away => CH_REAR,
    };

    let mut data = vec![0u8; (out_w * out_h * 4) as usize];
    for y in 0..out_h {
        for x in 0..out_w {
            let p = Point2::new(
                bbox2d.x + (x as f64 + 0.5) / out_w as f64 * bbox2d.w,
                bbox2d.y + (y as f64 + 0.5) / out_h as f64 * bbox2d.h,
            );
            let idx = ((y * out_w + x) * 4) as usize;
            if point_in_quad(p, &front) {
                data[idx + end_channel] = 1;
            } else if point_in_quad(p, &side) {
                data[idx + CH_SIDE] = 1;
            } else if point_in_quad(p, &roof) {
                data[idx + CH_ROOF] = 1;
            }
        }
    }
    Ok(RastMask {
        w: out_w,
        h: out_h,
        data,
        crop: bbox2d,
    })
}
