//! Minimal raster drawing for overlay debug images and PR-curve plots.

use boxgeom::box3d::Box3D;
use boxgeom::eval::PRCurve;
use image::RgbImage;

pub fn draw_line(img: &mut RgbImage, x0: f64, y0: f64, x1: f64, y1: f64, color: [u8; 3]) {
    let (w, h) = img.dimensions();
    let mut x0 = x0.round() as i64;
    let mut y0 = y0.round() as i64;
    let x1 = x1.round() as i64;
    let y1 = y1.round() as i64;
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if x0 >= 0 && y0 >= 0 && (x0 as u32) < w && (y0 as u32) < h {
            img.get_pixel_mut(x0 as u32, y0 as u32).0 = color;
        }
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// Draws the twelve box edges.
pub fn draw_box(img: &mut RgbImage, b: &Box3D, color: [u8; 3]) {
    const EDGES: [(usize, usize); 12] = [
        (0, 1), (1, 2), (2, 3), (3, 0), // roof
        (4, 5), (5, 6), (6, 7), (7, 4), // bottom
        (0, 4), (1, 5), (2, 6), (3, 7), // verticals
    ];
    for (i, j) in EDGES {
        let p = b.vertex(i);
        let q = b.vertex(j);
        draw_line(img, p.x, p.y, q.x, q.y, color);
    }
}

/// Renders the PR curve into a simple square plot with axes.
pub fn plot_pr_curve(curve: &PRCurve, size: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(size, size, image::Rgb([255, 255, 255]));
    let margin = 24.0;
    let span = size as f64 - 2.0 * margin;
    let to_px = |recall: f64, precision: f64| {
        (
            margin + recall * span,
            size as f64 - margin - precision * span,
        )
    };
    let axis = [90u8, 90, 90];
    let (x0, y0) = to_px(0.0, 0.0);
    let (x1, _) = to_px(1.0, 0.0);
    let (_, y1) = to_px(0.0, 1.0);
    draw_line(&mut img, x0, y0, x1, y0, axis);
    draw_line(&mut img, x0, y0, x0, y1, axis);
    let blue = [30u8, 60, 200];
    let mut prev: Option<(f64, f64)> = None;
    for &(precision, recall) in &curve.points {
        let (x, y) = to_px(recall, precision);
        if let Some((px, py)) = prev {
            draw_line(&mut img, px, py, x, y, blue);
        }
        prev = Some((x, y));
    }
    img
}
