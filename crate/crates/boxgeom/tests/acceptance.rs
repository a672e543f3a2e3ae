//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Oracle code in this file is written independently of the library paths it
//! checks: the point-in-polygon oracle uses ray crossing instead of signed
//! areas, and the AP oracle re-evaluates every threshold from scratch.

use boxgeom::augment::{
    apply_color_shift, augment_sample, draw_color_shift, shift_pixel_hsv, AugmentConfig, Mode,
    SeedPolicy,
};
use boxgeom::box3d::{construct_box, direction_angle_deg, TravelDirection};
use boxgeom::dataset::{make_splits, validate, Annotations, Label, Record, Split, SplitMode};
use boxgeom::estimate::{
    decode_bins, encode_angle, estimate_box, extract_contour, AngleTriple, ContourMap, NUM_BINS,
};
use boxgeom::eval::{pr_curve_from_scores, track_accuracy, PredictionSet};
use boxgeom::geom::{homography_from_quads, warp_perspective, Point2, Quad, Rect};
use boxgeom::rast::{rasterize, CH_FRONT, CH_REAR, CH_ROOF, CH_SIDE};
use boxgeom::synthetic;
use boxgeom::unpack::{layout_from_box, unpack};
use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn criterion(n: u32, desc: &str, run: impl FnOnce() -> Result<String, String>) {
    match run() {
        Ok(extra) => {
            println!("criterion {n:02} PASS  {desc}{extra}");
        }
        Err(msg) => {
            println!("criterion {n:02} FAIL  {desc}: {msg}");
            panic!("criterion {n} failed: {msg}");
        }
    }
}

fn random_quad(rng: &mut ChaCha8Rng, base: f64, amp: f64) -> Quad {
    loop {
        let mut j = || rng.gen_range(-amp..amp);
        let q = Quad::new(
            Point2::new(j(), j()),
            Point2::new(base + j(), j()),
            Point2::new(base + j(), base + j()),
            Point2::new(j(), base + j()),
        );
        if let Ok(q) = q {
            return q;
        }
    }
}

#[test]
fn criterion_01_geometry() {
    criterion(
        1,
        "homography round trips < 1e-6 px on 1000 quads; warp round trip MAE < 2/255",
        || {
            let start = Instant::now();
            let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
            let mut max_err: f64 = 0.0;
            for _ in 0..1000 {
                let src = random_quad(&mut rng, 100.0, 20.0);
                let dst = random_quad(&mut rng, 85.0, 25.0);
                let h = homography_from_quads(&src, &dst).map_err(|e| e.to_string())?;
                for i in 0..4 {
                    let mapped = h.apply(src.p[i]).ok_or("corner mapped to infinity")?;
                    max_err = max_err.max(mapped.distance(dst.p[i]));
                }
            }
            if max_err >= 1e-6 {
                return Err(format!("max corner error {max_err:.3e} px"));
            }

            // Smooth-edged checkerboard so the error budget measures the
            // warp, not the fixture's own aliasing.
            let mut img = RgbImage::new(128, 128);
            for (x, y, p) in img.enumerate_pixels_mut() {
                let v = 127.5
                    + 127.5
                        * (2.0 * std::f64::consts::PI * x as f64 / 32.0).sin()
                        * (2.0 * std::f64::consts::PI * y as f64 / 32.0).sin();
                let v = v.round().clamp(0.0, 255.0) as u8;
                p.0 = [v, v, v];
            }
            let src = Quad::from_rect(0.0, 0.0, 128.0, 128.0).unwrap();
            let dst = random_quad(&mut rng, 128.0, 5.0);
            let h = homography_from_quads(&src, &dst).map_err(|e| e.to_string())?;
            let fwd = warp_perspective(&img, &h, 128, 128).map_err(|e| e.to_string())?;
            let back = warp_perspective(&fwd, &h.inverse().unwrap(), 128, 128)
                .map_err(|e| e.to_string())?;
            let mut sum = 0.0;
            let mut n = 0usize;
            for y in 16..112u32 {
                for x in 16..112u32 {
                    sum +=
                        (back.get_pixel(x, y).0[0] as f64 - img.get_pixel(x, y).0[0] as f64).abs();
                    n += 1;
                }
            }
            let mae = sum / n as f64;
            if mae >= 2.0 {
                return Err(format!("warp round-trip MAE {mae:.3} >= 2/255"));
            }
            let elapsed = start.elapsed();
            if elapsed.as_secs_f64() >= 10.0 {
                return Err(format!("runtime {elapsed:?} >= 10 s"));
            }
            Ok(format!(
                " (max corner err {max_err:.2e} px, MAE {mae:.3}, {elapsed:.2?})"
            ))
        },
    );
}

#[test]
fn criterion_02_unpack() {
    criterion(
        2,
        "zero block all-zero, blocks flush; flood-fill blocks uniform; painted b1b5 on F/S boundary ± 1 px",
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
            for _ in 0..10 {
                let s = synthetic::random_cuboid(&mut rng);
                let layout = layout_from_box(&s.box3d, 256).map_err(|e| e.to_string())?;
                if layout.w_f + layout.w_s != 256 || layout.h_r + layout.h_s != 256 {
                    return Err("blocks not flush with the target size".into());
                }
                let colors = [[210u8, 40, 40], [40, 210, 40], [40, 40, 210]];
                let img = synthetic::render_face_fill(&s.box3d, 512, 512, colors)
                    .map_err(|e| e.to_string())?;
                let u = unpack(&img, &s.box3d, &layout).map_err(|e| e.to_string())?;

                for y in 0..layout.h_r {
                    for x in 0..layout.w_f {
                        if u.pixels.get_pixel(x, y).0 != [0, 0, 0] {
                            return Err(format!("zero block pixel ({x},{y}) not zero"));
                        }
                    }
                }
                let blocks = [
                    (0, layout.h_r, layout.w_f, 256, colors[0]),
                    (layout.w_f, layout.h_r, 256, 256, colors[1]),
                    (layout.w_f, 0, 256, layout.h_r, colors[2]),
                ];
                for (x0, y0, x1, y1, want) in blocks {
                    for y in (y0 + 4)..(y1 - 4) {
                        for x in (x0 + 4)..(x1 - 4) {
                            if u.pixels.get_pixel(x, y).0 != want {
                                return Err(format!(
                                    "block pixel ({x},{y}) = {:?}, want {want:?}",
                                    u.pixels.get_pixel(x, y).0
                                ));
                            }
                        }
                    }
                }

                // Painted shared edge b1b5.
                let paint = synthetic::render_edge_paint(&s.box3d, 512, 512, 1, 5, 2.0);
                let up = unpack(&paint, &s.box3d, &layout).map_err(|e| e.to_string())?;
                let wf = layout.w_f;
                for y in (layout.h_r + 3)..253 {
                    let bright: Vec<u32> = (0..256)
                        .filter(|&x| up.pixels.get_pixel(x, y).0[0] >= 200)
                        .collect();
                    if bright.is_empty() {
                        return Err(format!("row {y}: painted edge missing"));
                    }
                    if !bright.iter().any(|&x| x + 2 >= wf && x <= wf + 1) {
                        return Err(format!(
                            "row {y}: paint misses boundary column {wf} (bright {bright:?})"
                        ));
                    }
                }
            }
            Ok(String::new())
        },
    );
}

/// Independent point-in-quad oracle: explicit on-segment test plus a
/// horizontal ray-crossing count.
fn oracle_in_quad(p: Point2, q: &Quad) -> bool {
    for i in 0..4 {
        let a = q.p[i];
        let b = q.p[(i + 1) % 4];
        let cross = (b - a).cross(p - a);
        let within = p.x >= a.x.min(b.x) - 1e-12
            && p.x <= a.x.max(b.x) + 1e-12
            && p.y >= a.y.min(b.y) - 1e-12
            && p.y <= a.y.max(b.y) + 1e-12;
        if cross == 0.0 && within {
            return true;
        }
    }
    let mut inside = false;
    for i in 0..4 {
        let a = q.p[i];
        let b = q.p[(i + 1) % 4];
        if (a.y > p.y) != (b.y > p.y) {
            let t = (p.y - a.y) / (b.y - a.y);
            if a.x + t * (b.x - a.x) > p.x {
                inside = !inside;
            }
        }
    }
    inside
}

#[test]
fn criterion_03_rast() {
    criterion(
        3,
        "mask equals scan-line oracle on 200 random boxes at 64x64; d-flip swaps channels 0 and 1",
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
            for case in 0..200 {
                let s = synthetic::random_cuboid(&mut rng);
                let b = s.box3d;
                let bbox = b.bounding_rect();
                let mask = rasterize(&b, bbox, 64, 64).map_err(|e| e.to_string())?;
                let front = b.front_quad().unwrap();
                let side = b.side_quad().unwrap();
                let roof = b.roof_quad().unwrap();
                let end = match b.direction() {
                    TravelDirection::Toward => CH_FRONT,
                    TravelDirection::Away => CH_REAR,
                };
                for y in 0..64u32 {
                    for x in 0..64u32 {
                        let p = Point2::new(
                            bbox.x + (x as f64 + 0.5) / 64.0 * bbox.w,
                            bbox.y + (y as f64 + 0.5) / 64.0 * bbox.h,
                        );
                        let mut want = [0u8; 4];
                        if oracle_in_quad(p, &front) {
                            want[end] = 1;
                        } else if oracle_in_quad(p, &side) {
                            want[CH_SIDE] = 1;
                        } else if oracle_in_quad(p, &roof) {
                            want[CH_ROOF] = 1;
                        }
                        if mask.channels(x, y) != want {
                            return Err(format!(
                                "box {case} pixel ({x},{y}): {:?} vs oracle {want:?}",
                                mask.channels(x, y)
                            ));
                        }
                    }
                }
                let flipped =
                    rasterize(&b.with_direction(b.direction().flipped()), bbox, 64, 64)
                        .map_err(|e| e.to_string())?;
                for y in 0..64 {
                    for x in 0..64 {
                        let a = mask.channels(x, y);
                        let f = flipped.channels(x, y);
                        if [a[1], a[0], a[2], a[3]] != f {
                            return Err(format!("d-flip mismatch at ({x},{y})"));
                        }
                    }
                }
            }
            Ok(String::new())
        },
    );
}

#[test]
fn criterion_04_angle_codec() {
    criterion(
        4,
        "60 bins of 3° tile [-90,90); round trip <= 1.5° on a 0.1° grid; anchor encodings",
        || {
            if encode_angle(-90.0).unwrap() != 0
                || encode_angle(0.0).unwrap() != 30
                || encode_angle(89.9).unwrap() != 59
            {
                return Err("anchor encodings wrong".into());
            }
            let mut counts = [0u32; NUM_BINS];
            let mut prev = 0usize;
            for k in 0..1800 {
                let theta = -90.0 + k as f64 * 0.1;
                let idx = encode_angle(theta).map_err(|e| e.to_string())?;
                if idx < prev {
                    return Err("encode not monotone".into());
                }
                prev = idx;
                counts[idx] += 1;
            }
            if counts.iter().any(|&c| c != 30) {
                return Err("bins do not tile evenly (gaps or overlaps)".into());
            }
            if encode_angle(90.0).is_ok() || encode_angle(-90.0001).is_ok() {
                return Err("out-of-range angles accepted".into());
            }
            let mut k = 0;
            loop {
                let theta = -90.0 + k as f64 * 0.1;
                if theta >= 90.0 {
                    break;
                }
                let mut row = vec![0.0; NUM_BINS];
                row[encode_angle(theta).unwrap()] = 1.0;
                let back = decode_bins(&row);
                if (back - theta).abs() > 1.5 {
                    return Err(format!("round trip {theta}° -> {back}°"));
                }
                k += 1;
            }
            Ok(String::new())
        },
    );
}

#[test]
fn criterion_05_construct_box_round_trip() {
    criterion(
        5,
        "100 cuboid silhouettes: exact directions within 0.5 px; ±3° perturbed outputs stay valid",
        || {
            let start = Instant::now();
            let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
            for case in 0..100 {
                let s = synthetic::random_cuboid(&mut rng);
                let hull = synthetic::silhouette(&s.box3d).map_err(|e| e.to_string())?;
                let rec = construct_box(&hull, &s.dirs, s.box3d.direction())
                    .map_err(|e| e.to_string())?;
                for k in 0..8 {
                    let err = rec.vertex(k).distance(s.box3d.vertex(k));
                    if err >= 0.5 {
                        return Err(format!("case {case} vertex b{k}: error {err:.4} px"));
                    }
                }
                let jitter = |deg: f64, rng: &mut ChaCha8Rng| deg + rng.gen_range(-3.0..3.0);
                let dirs = boxgeom::box3d::DirectionTriplet::from_angles_deg(
                    jitter(direction_angle_deg(s.dirs.u_f).unwrap(), &mut rng),
                    jitter(direction_angle_deg(s.dirs.u_s).unwrap(), &mut rng),
                    jitter(direction_angle_deg(s.dirs.u_r).unwrap(), &mut rng),
                )
                .map_err(|e| e.to_string())?;
                // Box3D::new re-validates all invariants on construction.
                construct_box(&hull, &dirs, s.box3d.direction())
                    .map_err(|e| format!("case {case} perturbed: {e}"))?;
            }
            let elapsed = start.elapsed();
            if elapsed.as_secs_f64() >= 30.0 {
                return Err(format!("runtime {elapsed:?} >= 30 s"));
            }
            Ok(format!(" ({elapsed:.2?})"))
        },
    );
}

#[test]
fn criterion_06_estimate_box_end_to_end() {
    criterion(
        6,
        "synthetic render end-to-end mean vertex error < 1 px; two-ring fixture picks the global maximum",
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
            let mut total = 0.0;
            let mut count = 0usize;
            for _ in 0..5 {
                let s = synthetic::random_cuboid(&mut rng);
                let map = synthetic::render_silhouette_outline(&s.box3d, 512, 512)
                    .map_err(|e| e.to_string())?;
                let bb = s.box3d.bounding_rect();
                let bbox = Rect::new(bb.x - 8.0, bb.y - 8.0, bb.w + 16.0, bb.h + 16.0);
                let angles = AngleTriple::new(
                    direction_angle_deg(s.dirs.u_f).unwrap(),
                    direction_angle_deg(s.dirs.u_s).unwrap(),
                    direction_angle_deg(s.dirs.u_r).unwrap(),
                )
                .map_err(|e| e.to_string())?;
                let est = estimate_box(&map, bbox, &angles, s.box3d.direction())
                    .map_err(|e| e.to_string())?;
                for k in 0..8 {
                    total += est.vertex(k).distance(s.box3d.vertex(k));
                    count += 1;
                }
            }
            let mean = total / count as f64;
            if mean >= 1.0 {
                return Err(format!("mean vertex error {mean:.3} px"));
            }

            // Two concentric rectangle outlines: the stronger outer ring must
            // win even though rays meet the weaker inner ring first.
            let inner = Rect::new(56.0, 46.0, 28.0, 28.0);
            let outer = Rect::new(36.0, 26.0, 68.0, 68.0);
            let ring = |r: Rect, v: f32, data: &mut Vec<f32>, w: u32| {
                for y in 0..120u32 {
                    for x in 0..w {
                        let p = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
                        let on_x = (p.x - r.x).abs() < 0.75 || (p.x - r.x - r.w).abs() < 0.75;
                        let on_y = (p.y - r.y).abs() < 0.75 || (p.y - r.y - r.h).abs() < 0.75;
                        let in_x = p.x >= r.x - 0.75 && p.x <= r.x + r.w + 0.75;
                        let in_y = p.y >= r.y - 0.75 && p.y <= r.y + r.h + 0.75;
                        if (on_x && in_y) || (on_y && in_x) {
                            let cell = &mut data[(y * w + x) as usize];
                            *cell = cell.max(v);
                        }
                    }
                }
            };
            let mut data = vec![0.0f32; 160 * 120];
            ring(inner, 0.6, &mut data, 160);
            ring(outer, 0.9, &mut data, 160);
            let map = ContourMap::new(160, 120, data).unwrap();
            let contour = extract_contour(&map, Rect::new(26.0, 16.0, 88.0, 88.0), 0.1)
                .map_err(|e| e.to_string())?;
            let c = Point2::new(inner.x + inner.w / 2.0, inner.y + inner.h / 2.0);
            let outer_hits = contour
                .points
                .iter()
                .filter(|p| c.distance(**p) > 20.0)
                .count();
            if (outer_hits as f64) < 0.95 * contour.points.len() as f64 {
                return Err(format!(
                    "only {outer_hits}/{} rays chose the global maximum",
                    contour.points.len()
                ));
            }
            Ok(format!(" (mean vertex error {mean:.3} px)"))
        },
    );
}

/// Exhaustive AP oracle: every distinct threshold re-evaluated from scratch.
fn ap_oracle(scored: &[(f64, bool)]) -> f64 {
    let mut thresholds: Vec<f64> = scored.iter().map(|(s, _)| *s).collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    let total_pos = scored.iter().filter(|(_, p)| *p).count() as f64;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let accepted: Vec<_> = scored.iter().filter(|(s, _)| *s <= t).collect();
        let tp = accepted.iter().filter(|(_, p)| *p).count() as f64;
        ap += (tp / total_pos - prev_recall) * (tp / accepted.len() as f64);
        prev_recall = tp / total_pos;
    }
    ap
}

#[test]
fn criterion_07_eval() {
    criterion(
        7,
        "track merge matches hand example; AP matches exhaustive oracle (1e-9); AP invariant under 10 monotone maps",
        || {
            // Hand-computed merge: mean of [0.6,0.4],[0.3,0.7],[0.3,0.7] is
            // [0.4,0.6] -> class 1.
            let mk = |id: &str, track: &str, model: &str| Record {
                record_id: id.into(),
                image_path: format!("{id}.png"),
                camera_id: "cam".into(),
                track_id: track.into(),
                bbox2d: Rect::new(0.0, 0.0, 10.0, 10.0),
                box3d: None,
                mask_path: None,
                label: Label {
                    make: "m".into(),
                    model: model.into(),
                    submodel: "s".into(),
                    year: 2000,
                },
            };
            let records = vec![
                mk("i0", "t0", "model_b"),
                mk("i1", "t0", "model_b"),
                mk("i2", "t0", "model_b"),
                mk("a0", "t1", "model_a"),
            ];
            let split = Split {
                name: "hard".into(),
                train_tracks: vec![],
                test_tracks: vec!["t0".into(), "t1".into()],
                classes: vec![
                    "m|model_a|s|2000".into(),
                    "m|model_b|s|2000".into(),
                ],
            };
            let mut preds = PredictionSet::new();
            preds.insert_probs("i0", vec![0.6, 0.4]).unwrap();
            preds.insert_probs("i1", vec![0.3, 0.7]).unwrap();
            preds.insert_probs("i2", vec![0.3, 0.7]).unwrap();
            preds.insert_probs("a0", vec![1.0, 0.0]).unwrap();
            let (img_acc, track_acc) =
                track_accuracy(&preds, &records, &split).map_err(|e| e.to_string())?;
            if (track_acc - 1.0).abs() > 1e-12 || (img_acc - 0.75).abs() > 1e-12 {
                return Err(format!("merge example gave ({img_acc}, {track_acc})"));
            }

            let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
            let scored: Vec<(f64, bool)> = (0..20)
                .map(|_| (rng.gen_range(0.0..2.0), rng.gen_bool(0.4)))
                .collect();
            let ap = pr_curve_from_scores(&scored)
                .map_err(|e| e.to_string())?
                .average_precision;
            let oracle = ap_oracle(&scored);
            if (ap - oracle).abs() >= 1e-9 {
                return Err(format!("AP {ap} vs oracle {oracle}"));
            }
            let transforms: Vec<Box<dyn Fn(f64) -> f64>> = vec![
                Box::new(|x| 2.0 * x + 5.0),
                Box::new(|x| x.powi(3)),
                Box::new(|x| x.exp()),
                Box::new(|x| x.sqrt()),
                Box::new(|x| x.atan()),
                Box::new(|x| x / (1.0 + x)),
                Box::new(|x| x.ln_1p()),
                Box::new(|x| 0.01 * x),
                Box::new(|x| x + 1000.0),
                Box::new(|x| x.tanh()),
            ];
            for (i, f) in transforms.iter().enumerate() {
                let mapped: Vec<(f64, bool)> =
                    scored.iter().map(|(s, p)| (f(*s), *p)).collect();
                let ap2 = pr_curve_from_scores(&mapped)
                    .map_err(|e| e.to_string())?
                    .average_precision;
                if (ap2 - ap).abs() > 1e-12 {
                    return Err(format!("transform {i} changed AP: {ap2} vs {ap}"));
                }
            }
            Ok(format!(" (AP {ap:.6})"))
        },
    );
}

#[test]
fn criterion_08_augmentation_determinism() {
    criterion(
        8,
        "same-seed runs byte-identical; HSV shift has exactly zero spatial variance",
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
            let mut img = RgbImage::new(64, 64);
            for p in img.pixels_mut() {
                p.0 = [rng.gen(), rng.gen(), rng.gen()];
            }
            let cfg = AugmentConfig::default();
            let policy = SeedPolicy::new(2024);
            let mut png1 = Vec::new();
            let mut png2 = Vec::new();
            for (epoch, buf) in [(3u64, &mut png1), (3u64, &mut png2)] {
                let (out, _) =
                    augment_sample(&img, None, &cfg, &policy, "rec", epoch, Mode::Train)
                        .map_err(|e| e.to_string())?;
                out.write_to(
                    &mut std::io::Cursor::new(&mut *buf),
                    image::ImageFormat::Png,
                )
                .map_err(|e| e.to_string())?;
            }
            if png1 != png2 {
                return Err("same-seed augmentation runs differ".into());
            }

            // The color shift must be one global (dh, ds, dv): recomputing
            // every pixel with the drawn deltas reproduces the image exactly,
            // so the per-pixel shift has zero variance.
            let mut draw_rng = policy.op_rng("rec", 3, "color");
            let (dh, ds, dv) = draw_color_shift(&cfg, &mut draw_rng);
            let shifted = apply_color_shift(&img, dh, ds, dv);
            for (a, b) in img.pixels().zip(shifted.pixels()) {
                if shift_pixel_hsv(a.0, dh, ds, dv) != b.0 {
                    return Err("per-pixel recompute deviates: shift not uniform".into());
                }
            }
            // Equal input colors map to equal outputs.
            let mut lut = std::collections::HashMap::new();
            for (a, b) in img.pixels().zip(shifted.pixels()) {
                if *lut.entry(a.0).or_insert(b.0) != b.0 {
                    return Err("identical input colors diverged".into());
                }
            }
            Ok(String::new())
        },
    );
}

#[test]
fn criterion_09_splits() {
    criterion(
        9,
        "1000 seeded splits all camera-disjoint with the 15-train/1-test thresholds enforced",
        || {
            let mut records = Vec::new();
            for class in 0..4 {
                for cam in 0..6 {
                    // Class 3 is sparse and must always be dropped.
                    let tracks = if class == 3 { 2 } else { 10 };
                    for t in 0..tracks {
                        let track = format!("c{class}_cam{cam}_t{t}");
                        records.push(Record {
                            record_id: format!("{track}_i0"),
                            image_path: format!("{track}_i0.png"),
                            camera_id: format!("cam{cam}"),
                            track_id: track.clone(),
                            bbox2d: Rect::new(0.0, 0.0, 32.0, 24.0),
                            box3d: None,
                            mask_path: None,
                            label: Label {
                                make: "make".into(),
                                model: format!("model{class}"),
                                submodel: "s".into(),
                                year: 2010,
                            },
                        });
                    }
                }
            }
            let track_camera: std::collections::BTreeMap<&str, &str> = records
                .iter()
                .map(|r| (r.track_id.as_str(), r.camera_id.as_str()))
                .collect();
            let track_class: std::collections::BTreeMap<&str, String> = records
                .iter()
                .map(|r| (r.track_id.as_str(), r.label.hard_key()))
                .collect();

            for seed in 0..1000u64 {
                let split = make_splits(&records, SplitMode::Hard, seed, 0.5)
                    .map_err(|e| format!("seed {seed}: {e}"))?;
                let train_cams: std::collections::BTreeSet<&str> = split
                    .train_tracks
                    .iter()
                    .map(|t| track_camera[t.as_str()])
                    .collect();
                let test_cams: std::collections::BTreeSet<&str> = split
                    .test_tracks
                    .iter()
                    .map(|t| track_camera[t.as_str()])
                    .collect();
                if !train_cams.is_disjoint(&test_cams) {
                    return Err(format!("seed {seed}: camera leak across the split"));
                }
                if split.classes.iter().any(|c| c.contains("model3")) {
                    return Err(format!("seed {seed}: sparse class survived"));
                }
                // Thresholds per surviving class.
                for class in &split.classes {
                    let n_train = split
                        .train_tracks
                        .iter()
                        .filter(|t| &track_class[t.as_str()] == class)
                        .count();
                    let n_test = split
                        .test_tracks
                        .iter()
                        .filter(|t| &track_class[t.as_str()] == class)
                        .count();
                    if n_train < 15 || n_test < 1 {
                        return Err(format!(
                            "seed {seed}: class {class} kept with {n_train}/{n_test} tracks"
                        ));
                    }
                }
                // Reproducibility.
                let again = make_splits(&records, SplitMode::Hard, seed, 0.5).unwrap();
                if again != split {
                    return Err(format!("seed {seed}: split not reproducible"));
                }
            }
            Ok(String::new())
        },
    );
}

#[test]
fn criterion_10_boxcars116k_when_present() {
    criterion(
        10,
        "BoxCars116k corpus checks (116,286 images / 27,496 vehicles / 693 classes / 45 makes; hard split 107 classes, 11,653/11,125 tracks; first gap bin 56% ± 2 pp)",
        || {
            let dir = match std::env::var("BOXCARS116K_DIR") {
                Ok(d) => std::path::PathBuf::from(d),
                Err(_) => {
                    return Ok(
                        " — SKIPPED: BoxCars116k not present (set BOXCARS116K_DIR to run)"
                            .into(),
                    );
                }
            };
            let ann = Annotations::load(&dir.join("annotations.json"))
                .map_err(|e| e.to_string())?;
            let report = validate(&ann.records);
            if report.images != 116_286
                || report.vehicles != 27_496
                || report.classes != 693
                || report.makes != 45
            {
                return Err(format!(
                    "corpus counts: {} images, {} vehicles, {} classes, {} makes",
                    report.images, report.vehicles, report.classes, report.makes
                ));
            }
            let split = Split::load(&dir.join("split_hard.json")).map_err(|e| e.to_string())?;
            if split.classes.len() != 107
                || split.train_tracks.len() != 11_653
                || split.test_tracks.len() != 11_125
            {
                return Err(format!(
                    "hard split: {} classes, {}/{} tracks",
                    split.classes.len(),
                    split.train_tracks.len(),
                    split.test_tracks.len()
                ));
            }
            // First-bin share of the viewpoint gap distribution.
            let calib = {
                let r = ann
                    .records
                    .iter()
                    .find_map(|r| {
                        let b = r.box3d.as_ref()?;
                        boxgeom::box3d::calib_from_box(b, r.bbox2d.center()).ok()
                    })
                    .ok_or("no record yields a calibration")?;
                r
            };
            let train_set: std::collections::BTreeSet<&str> =
                split.train_tracks.iter().map(|s| s.as_str()).collect();
            let test_set: std::collections::BTreeSet<&str> =
                split.test_tracks.iter().map(|s| s.as_str()).collect();
            let mut train_rays = Vec::new();
            let mut test_rays = Vec::new();
            for r in &ann.records {
                if let Some(b) = &r.box3d {
                    if let Ok(w) = boxgeom::box3d::viewpoint_3d(b, &calib) {
                        if train_set.contains(r.track_id.as_str()) {
                            train_rays.push(w);
                        } else if test_set.contains(r.track_id.as_str()) {
                            test_rays.push(w);
                        }
                    }
                }
            }
            // First-bin membership only needs *any* training ray within 2°,
            // so the scan short-circuits.
            let threshold = 2.0f64.to_radians();
            let mut first_bin = 0usize;
            for w in &test_rays {
                if train_rays
                    .iter()
                    .any(|t| boxgeom::box3d::ray_angle(*w, *t) < threshold)
                {
                    first_bin += 1;
                }
            }
            let share = first_bin as f64 / test_rays.len() as f64 * 100.0;
            if (share - 56.0).abs() > 2.0 {
                return Err(format!("first gap bin holds {share:.1}% of test samples"));
            }
            Ok(format!(" (first bin {share:.1}%)"))
        },
    );
}

#[test]
fn criterion_11_scope_statement() {
    criterion(
        11,
        "scope statement",
        || {
            println!(
                "NOTE: headline CNN accuracies from the source experiments (e.g. \
                 VGG16+ALL 84.13/92.27) require training deep networks and are NOT \
                 reproduced here; this toolkit guarantees bit-exact inputs \
                 (criteria 1-6) and bit-exact evaluation math (criterion 7) around \
                 that training step."
            );
            Ok(String::new())
        },
    );
}
