//! Training-time augmentation: whole-image HSV shift, noise-rectangle drop,
//! horizontal flip and 2D-bbox jitter.
//!
//! Every operation takes an explicit random stream; nothing touches a global
//! RNG. Per-record streams are derived deterministically from a global seed,
//! the record id and the epoch, so augmentation runs are bit-reproducible.

use crate::box3d::Viewpoint2D;
use crate::error::{Error, Result};
use crate::geom::Rect;
use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Augmentation probabilities and magnitudes. All fields are exposed in the
/// job config; the defaults keep the changes visible without destroying the
/// class evidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub p_color: f64,
    pub p_drop: f64,
    pub p_flip: f64,
    /// Hue shift range in degrees (uniform in [-h_range, +h_range]).
    pub h_range: f64,
    /// Saturation/value shift range in normalized units.
    pub sv_range: f64,
    /// Noise rectangle size as a fraction of each image dimension.
    pub drop_frac: (f64, f64),
    /// Bbox translation amplitude as a fraction of the bbox dimensions.
    pub jitter_frac: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            p_color: 0.5,
            p_drop: 0.5,
            p_flip: 0.5,
            h_range: 18.0,
            sv_range: 0.15,
            drop_frac: (0.1, 0.4),
            jitter_frac: 0.1,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_color", self.p_color),
            ("p_drop", self.p_drop),
            ("p_flip", self.p_flip),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidData(format!("{name}={p} outside [0, 1]")));
            }
        }
        if self.h_range < 0.0 || self.sv_range < 0.0 || self.jitter_frac < 0.0 {
            return Err(Error::InvalidData("negative augmentation range".into()));
        }
        let (lo, hi) = self.drop_frac;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidData(format!(
                "drop_frac ({lo}, {hi}) must satisfy 0 <= min <= max <= 1"
            )));
        }
        Ok(())
    }
}

/// Deterministic per-sample stream derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub global_seed: u64,
}

/// 64-bit FNV-1a, stable across platforms and releases.
fn fnv1a(bytes: &[u8], mut state: u64) -> u64 {
    for &b in bytes {
        state ^= b as u64;
        state = state.wrapping_mul(0x100_0000_01b3);
    }
    state
}

impl SeedPolicy {
    pub fn new(global_seed: u64) -> Self {
        Self { global_seed }
    }

    /// Stream seed = hash(global_seed, record_id, epoch).
    pub fn sample_seed(&self, record_id: &str, epoch: u64) -> u64 {
        let mut h = fnv1a(&self.global_seed.to_le_bytes(), 0xcbf2_9ce4_8422_2325);
        h = fnv1a(record_id.as_bytes(), h);
        fnv1a(&epoch.to_le_bytes(), h)
    }

    pub fn sample_rng(&self, record_id: &str, epoch: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.sample_seed(record_id, epoch))
    }

    /// Independent sub-stream for one operation of a sample, so the drawn
    /// parameters do not depend on the order the operations run in.
    pub fn op_rng(&self, record_id: &str, epoch: u64, op: &str) -> ChaCha8Rng {
        let h = fnv1a(op.as_bytes(), self.sample_seed(record_id, epoch));
        ChaCha8Rng::seed_from_u64(h)
    }
}

/// RGB (0..255) to HSV with h in [0, 360), s and v in [0, 1].
pub fn rgb_to_hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let r = rgb[0] as f64 / 255.0;
    let g = rgb[1] as f64 / 255.0;
    let b = rgb[2] as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

/// HSV back to RGB bytes (rounded).
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h.rem_euclid(360.0);
    let c = v * s;
    let x = c * (1.0 - ((h / 60.0).rem_euclid(2.0) - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match (h / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [
        ((r + m) * 255.0).round().clamp(0.0, 255.0) as u8,
        ((g + m) * 255.0).round().clamp(0.0, 255.0) as u8,
        ((b + m) * 255.0).round().clamp(0.0, 255.0) as u8,
    ]
}

/// Applies one HSV shift to a single pixel: hue wraps, s and v clamp.
pub fn shift_pixel_hsv(rgb: [u8; 3], dh: f64, ds: f64, dv: f64) -> [u8; 3] {
    let (h, s, v) = rgb_to_hsv(rgb);
    hsv_to_rgb(h + dh, (s + ds).clamp(0.0, 1.0), (v + dv).clamp(0.0, 1.0))
}

/// Adds the same random HSV shift to every pixel. The three deltas are drawn
/// once per image; the spatial variance of the applied shift is zero.
pub fn color_jitter<R: Rng>(img: &RgbImage, cfg: &AugmentConfig, rng: &mut R) -> RgbImage {
    let (dh, ds, dv) = draw_color_shift(cfg, rng);
    apply_color_shift(img, dh, ds, dv)
}

/// Draws the per-image HSV deltas.
pub fn draw_color_shift<R: Rng>(cfg: &AugmentConfig, rng: &mut R) -> (f64, f64, f64) {
    let dh = if cfg.h_range > 0.0 {
        rng.gen_range(-cfg.h_range..cfg.h_range)
    } else {
        0.0
    };
    let mut sv = || {
        if cfg.sv_range > 0.0 {
            rng.gen_range(-cfg.sv_range..cfg.sv_range)
        } else {
            0.0
        }
    };
    (dh, sv(), sv())
}

/// Applies a fixed HSV shift to the whole image.
pub fn apply_color_shift(img: &RgbImage, dh: f64, ds: f64, dv: f64) -> RgbImage {
    let mut out = img.clone();
    for p in out.pixels_mut() {
        p.0 = shift_pixel_hsv(p.0, dh, ds, dv);
    }
    out
}

/// Replaces a random rectangle with independent uniform noise. Returns the
/// image and the rectangle that was filled (zero-sized when drop_frac is 0).
pub fn image_drop<R: Rng>(
    img: &RgbImage,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<(RgbImage, Rect)> {
    let (w, h) = img.dimensions();
    if w < 8 || h < 8 {
        return Err(Error::InvalidData(format!(
            "image {w}x{h} below the 8x8 minimum"
        )));
    }
    let (lo, hi) = cfg.drop_frac;
    let frac_w = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let frac_h = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let rw = (w as f64 * frac_w).round() as u32;
    let rh = (h as f64 * frac_h).round() as u32;
    let mut out = img.clone();
    if rw == 0 || rh == 0 {
        return Ok((out, Rect::new(0.0, 0.0, 0.0, 0.0)));
    }
    let x0 = if rw < w { rng.gen_range(0..=(w - rw)) } else { 0 };
    let y0 = if rh < h { rng.gen_range(0..=(h - rh)) } else { 0 };
    for y in y0..(y0 + rh) {
        for x in x0..(x0 + rw) {
            let p = out.get_pixel_mut(x, y);
            for c in 0..3 {
                p.0[c] = rng.gen_range(0..=255u32) as u8;
            }
        }
    }
    Ok((out, Rect::new(x0 as f64, y0 as f64, rw as f64, rh as f64)))
}

/// Mirrors the image about the vertical axis and negates the x components of
/// the view vectors; the travel-direction flag is unchanged.
pub fn hflip(img: &RgbImage, view: &Viewpoint2D) -> (RgbImage, Viewpoint2D) {
    let (w, h) = img.dimensions();
    let mut out = RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            out.put_pixel(x, y, *img.get_pixel(w - 1 - x, y));
        }
    }
    let flip = |v: [f64; 2]| [-v[0], v[1]];
    (
        out,
        Viewpoint2D {
            v_f: flip(view.v_f),
            v_s: flip(view.v_s),
            v_r: flip(view.v_r),
            d: view.d,
        },
    )
}

/// Translates the bbox by a uniform draw scaled by its own dimensions,
/// then clips the translation so the box stays inside `bounds`. Dimensions
/// are unchanged.
pub fn bbox_jitter<R: Rng>(
    bbox2d: Rect,
    cfg: &AugmentConfig,
    rng: &mut R,
    bounds: Rect,
) -> Result<Rect> {
    if !bounds.contains_rect(&bbox2d) {
        return Err(Error::InvalidData("bbox not inside bounds".into()));
    }
    let amp = cfg.jitter_frac;
    let (dx, dy) = if amp > 0.0 {
        (
            rng.gen_range(-amp..amp) * bbox2d.w,
            rng.gen_range(-amp..amp) * bbox2d.h,
        )
    } else {
        (0.0, 0.0)
    };
    let x = (bbox2d.x + dx).clamp(bounds.x, bounds.x + bounds.w - bbox2d.w);
    let y = (bbox2d.y + dy).clamp(bounds.y, bounds.y + bounds.h - bbox2d.h);
    Ok(Rect::new(x, y, bbox2d.w, bbox2d.h))
}

/// Whether the pipeline runs augmentations (training) or passes inputs
/// through untouched (evaluation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// One training-mode pass over an image: flip, color, drop, in that order so
/// the drop noise is never color-shifted. Each gate and each operation draws
/// from its own derived stream.
pub fn augment_sample(
    img: &RgbImage,
    view: Option<&Viewpoint2D>,
    cfg: &AugmentConfig,
    policy: &SeedPolicy,
    record_id: &str,
    epoch: u64,
    mode: Mode,
) -> Result<(RgbImage, Option<Viewpoint2D>)> {
    if mode == Mode::Eval {
        return Ok((img.clone(), view.copied()));
    }
    cfg.validate()?;
    let mut gates = policy.op_rng(record_id, epoch, "gates");
    let do_flip = gates.gen_bool(cfg.p_flip);
    let do_color = gates.gen_bool(cfg.p_color);
    let do_drop = gates.gen_bool(cfg.p_drop);

    let mut out = img.clone();
    let mut out_view = view.copied();
    if do_flip {
        let v = out_view.unwrap_or(Viewpoint2D {
            v_f: [1.0, 0.0],
            v_s: [1.0, 0.0],
            v_r: [0.0, -1.0],
            d: 0,
        });
        let (img2, v2) = hflip(&out, &v);
        out = img2;
        if out_view.is_some() {
            out_view = Some(v2);
        }
    }
    if do_color {
        let mut rng = policy.op_rng(record_id, epoch, "color");
        out = color_jitter(&out, cfg, &mut rng);
    }
    if do_drop {
        let mut rng = policy.op_rng(record_id, epoch, "drop");
        out = image_drop(&out, cfg, &mut rng)?.0;
    }
    Ok((out, out_view))
}
