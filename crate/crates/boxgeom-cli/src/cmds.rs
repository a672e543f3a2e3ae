//! Subcommand implementations.

use crate::draw;
use crate::manifest::Manifest;
use anyhow::{anyhow, bail, Context};
use boxgeom::augment::{augment_sample, AugmentConfig, Mode, SeedPolicy};
use boxgeom::box3d::{calib_from_box, Box3D, CameraCalib, TravelDirection};
use boxgeom::dataset::{make_splits, stats, validate, Annotations, Record, Split, SplitMode};
use boxgeom::estimate::{
    estimate_box_with_threshold, gt_directions, AngleTriple, ContourMap, GtSource,
};
use boxgeom::eval::{
    sample_track_pairs, track_accuracy, verification, viewpoint_gap_analysis,
    DEFAULT_GAP_BIN_EDGES,
};
use boxgeom::geom::Point2;
use boxgeom::rast::rasterize;
use boxgeom::unpack::{layout_from_box, unpack, UnpackLayout};
use boxgeom::{io as bio, Error as BoxError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Error carrying the exit code 2 contract: a named missing input.
#[derive(Debug)]
pub struct MissingInput(pub PathBuf);

impl std::fmt::Display for MissingInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "input file not found: {}", self.0.display())
    }
}

impl std::error::Error for MissingInput {}

fn require_input(path: &Path) -> anyhow::Result<()> {
    if !path.exists() {
        return Err(anyhow!(MissingInput(path.to_path_buf())));
    }
    Ok(())
}

fn load_annotations(path: &Path) -> anyhow::Result<Annotations> {
    require_input(path)?;
    Annotations::load(path).with_context(|| format!("loading {}", path.display()))
}

fn load_split(path: &Path) -> anyhow::Result<Split> {
    require_input(path)?;
    Split::load(path).with_context(|| format!("loading {}", path.display()))
}

/// Optional job configuration file (TOML or JSON by extension).
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct JobConfig {
    pub dataset: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub target_size: Option<u32>,
    pub mode: Option<Mode>,
    pub augment: Option<AugmentConfig>,
}

impl JobConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        require_input(path)?;
        let text = std::fs::read_to_string(path)?;
        let cfg = if path.extension().and_then(|e| e.to_str()) == Some("json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        Ok(cfg)
    }
}

fn thread_pool(workers: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()?)
}

/// Per-record results sorted by record id, plus skipped record ids.
type ProcessOutcome<T> = (Vec<(String, T)>, Vec<String>);

/// Runs `f` over the records on the worker pool. Failures abort the run
/// unless `skip_bad` is set, in which case they are collected. Results come
/// back sorted by record id.
fn process_records<T: Send>(
    records: Vec<&Record>,
    workers: usize,
    skip_bad: bool,
    f: impl Fn(&Record) -> anyhow::Result<T> + Sync,
) -> anyhow::Result<ProcessOutcome<T>> {
    let pool = thread_pool(workers)?;
    let results: Vec<(String, anyhow::Result<T>)> = pool.install(|| {
        records
            .par_iter()
            .map(|r| (r.record_id.clone(), f(r)))
            .collect()
    });
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    let mut first_err: Option<(String, anyhow::Error)> = None;
    for (id, res) in results {
        match res {
            Ok(v) => ok.push((id, v)),
            Err(e) => {
                if skip_bad {
                    log::warn!("skipping record {id}: {e:#}");
                    skipped.push(id);
                } else if first_err.as_ref().map(|(fid, _)| &id < fid).unwrap_or(true) {
                    first_err = Some((id, e));
                }
            }
        }
    }
    if let Some((id, e)) = first_err {
        return Err(e.context(format!("record {id} failed (use --skip-bad to continue)")));
    }
    ok.sort_by(|a, b| a.0.cmp(&b.0));
    skipped.sort();
    Ok((ok, skipped))
}

/// Sidecar JSON written next to every unpacked image.
#[derive(Debug, Serialize, Deserialize)]
pub struct UnpackSidecar {
    pub record_id: String,
    pub layout: UnpackLayout,
    pub box3d: Box3D,
    pub source_image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<boxgeom::box3d::Viewpoint2D>,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_unpack(
    annotations: &Path,
    images_dir: &Path,
    out_dir: &Path,
    target_size: u32,
    emit_view: bool,
    emit_rast: bool,
    rast_size: u32,
    seed: u64,
    workers: usize,
    skip_bad: bool,
) -> anyhow::Result<()> {
    let ann = load_annotations(annotations)?;
    require_input(images_dir)?;
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = Manifest::new("unpack", seed);
    manifest.add_input(annotations)?;
    manifest.add_input_path(images_dir);

    let records: Vec<&Record> = ann.records.iter().collect();
    let (done, skipped) = process_records(records, workers, skip_bad, |r| {
        let b = r
            .box3d
            .as_ref()
            .ok_or_else(|| anyhow!("record {} has no 3D box", r.record_id))?;
        let img_path = images_dir.join(&r.image_path);
        require_input(&img_path)?;
        let img = image::open(&img_path)
            .with_context(|| format!("reading {}", img_path.display()))?
            .to_rgb8();
        let layout = layout_from_box(b, target_size)?;
        let unpacked = unpack(&img, b, &layout)?;
        unpacked
            .pixels
            .save(out_dir.join(format!("{}.png", r.record_id)))?;
        let sidecar = UnpackSidecar {
            record_id: r.record_id.clone(),
            layout,
            box3d: *b,
            source_image: r.image_path.clone(),
            view: if emit_view {
                Some(boxgeom::box3d::view_vectors(b)?)
            } else {
                None
            },
        };
        std::fs::write(
            out_dir.join(format!("{}.json", r.record_id)),
            serde_json::to_string_pretty(&sidecar)?,
        )?;
        if emit_rast {
            let mask = rasterize(b, r.bbox2d, rast_size, rast_size)?;
            mask.to_rgba()
                .save(out_dir.join(format!("{}.rast.png", r.record_id)))?;
        }
        Ok(())
    })?;
    manifest.outputs = done.len();
    manifest.skipped = skipped;
    manifest.write(out_dir)?;
    log::info!("unpacked {} records into {}", done.len(), out_dir.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_augment(
    in_dir: &Path,
    out_dir: &Path,
    cfg: &AugmentConfig,
    mode: Mode,
    seed: u64,
    epoch: u64,
    workers: usize,
    skip_bad: bool,
) -> anyhow::Result<()> {
    require_input(in_dir)?;
    std::fs::create_dir_all(out_dir)?;
    cfg.validate()?;
    let mut manifest = Manifest::new("augment", seed);
    manifest.add_input_path(in_dir);
    let policy = SeedPolicy::new(seed);

    let mut stems: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(in_dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.ends_with(".png") && !name.ends_with(".rast.png") {
            stems.push(name.trim_end_matches(".png").to_string());
        }
    }
    stems.sort();
    if stems.is_empty() {
        bail!("no .png inputs in {}", in_dir.display());
    }

    let pool = thread_pool(workers)?;
    let results: Vec<(String, anyhow::Result<()>)> = pool.install(|| {
        stems
            .par_iter()
            .map(|stem| {
                let run = || -> anyhow::Result<()> {
                    let img = image::open(in_dir.join(format!("{stem}.png")))?.to_rgb8();
                    let sidecar_path = in_dir.join(format!("{stem}.json"));
                    let sidecar: Option<UnpackSidecar> = if sidecar_path.exists() {
                        Some(serde_json::from_str(&std::fs::read_to_string(
                            &sidecar_path,
                        )?)?)
                    } else {
                        None
                    };
                    let view = sidecar.as_ref().and_then(|s| s.view.as_ref());
                    let (aug, aug_view) =
                        augment_sample(&img, view, cfg, &policy, stem, epoch, mode)?;
                    aug.save(out_dir.join(format!("{stem}.png")))?;
                    if let Some(mut sc) = sidecar {
                        sc.view = aug_view;
                        std::fs::write(
                            out_dir.join(format!("{stem}.json")),
                            serde_json::to_string_pretty(&sc)?,
                        )?;
                    }
                    Ok(())
                };
                (stem.clone(), run())
            })
            .collect()
    });
    let mut outputs = 0usize;
    for (stem, res) in results {
        match res {
            Ok(()) => outputs += 1,
            Err(e) if skip_bad => {
                log::warn!("skipping {stem}: {e:#}");
                manifest.skipped.push(stem);
            }
            Err(e) => return Err(e.context(format!("augmenting {stem}"))),
        }
    }
    manifest.outputs = outputs;
    manifest.skipped.sort();
    manifest.write(out_dir)?;
    Ok(())
}

pub fn cmd_gt_directions(
    annotations: &Path,
    out_file: &Path,
    workers: usize,
    skip_bad: bool,
) -> anyhow::Result<()> {
    let ann = load_annotations(annotations)?;
    let mut manifest = Manifest::new("gt-directions", 0);
    manifest.add_input(annotations)?;
    if let Some(parent) = out_file.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let records: Vec<&Record> = ann.records.iter().collect();
    let (rows, skipped) = process_records(records, workers, skip_bad, |r| {
        let b = r
            .box3d
            .as_ref()
            .ok_or_else(|| anyhow!("record {} has no 3D box", r.record_id))?;
        Ok(gt_directions(GtSource::Box3D(b), r.bbox2d)?)
    })?;
    manifest.outputs = rows.len();
    manifest.skipped = skipped;
    bio::save_gt_angles(out_file, &rows)?;
    manifest.write(out_file)?;
    log::info!("wrote {} direction rows to {}", rows.len(), out_file.display());
    Ok(())
}

/// Output schema of estimate-bb.
#[derive(Debug, Serialize, Deserialize)]
pub struct EstimatedBoxes {
    pub records: Vec<EstimatedBox>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EstimatedBox {
    pub record_id: String,
    pub box3d: Box3D,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_estimate_bb(
    annotations: &Path,
    contours_dir: &Path,
    bins_file: Option<&Path>,
    gt_angles_file: Option<&Path>,
    out_file: &Path,
    overlay_dir: Option<&Path>,
    images_dir: Option<&Path>,
    threshold: f32,
    workers: usize,
    skip_bad: bool,
) -> anyhow::Result<()> {
    let ann = load_annotations(annotations)?;
    require_input(contours_dir)?;
    let mut manifest = Manifest::new("estimate-bb", 0);
    manifest.add_input(annotations)?;
    manifest.add_input_path(contours_dir);

    let mut angle_source: std::collections::BTreeMap<String, AngleTriple> =
        std::collections::BTreeMap::new();
    match (bins_file, gt_angles_file) {
        (Some(bins), None) => {
            require_input(bins)?;
            manifest.add_input(bins)?;
            for (id, b) in bio::load_direction_bins(bins)? {
                angle_source.insert(id, b.decode()?);
            }
        }
        (None, Some(gt)) => {
            require_input(gt)?;
            manifest.add_input(gt)?;
            for (id, a) in bio::load_gt_angles(gt)? {
                angle_source.insert(id, a);
            }
        }
        _ => bail!("exactly one of --bins or --gt-angles is required"),
    }

    if let Some(dir) = overlay_dir {
        std::fs::create_dir_all(dir)?;
    }
    if let Some(parent) = out_file.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }

    let records: Vec<&Record> = ann.records.iter().collect();
    let (done, skipped) = process_records(records, workers, skip_bad, |r| {
        let map_path = contours_dir.join(format!("{}.png", r.record_id));
        require_input(&map_path)?;
        let map = ContourMap::load_png(&map_path)?;
        let angles = angle_source
            .get(&r.record_id)
            .ok_or_else(|| anyhow!("no direction angles for record {}", r.record_id))?;
        let d = r
            .box3d
            .as_ref()
            .map(|b| b.direction())
            .unwrap_or(TravelDirection::Toward);
        let est = estimate_box_with_threshold(&map, r.bbox2d, angles, d, threshold)?;

        // Per-vertex error against the annotated box, when present.
        let err = r.box3d.as_ref().map(|gt| {
            let per: Vec<f64> = (0..8)
                .map(|i| est.vertex(i).distance(gt.vertex(i)))
                .collect();
            per
        });
        if let (Some(odir), Some(idir)) = (overlay_dir, images_dir) {
            let img_path = idir.join(&r.image_path);
            if img_path.exists() {
                let mut img = image::open(&img_path)?.to_rgb8();
                if let Some(gt) = &r.box3d {
                    draw::draw_box(&mut img, gt, [0, 200, 0]);
                }
                draw::draw_box(&mut img, &est, [220, 0, 0]);
                img.save(odir.join(format!("{}.png", r.record_id)))?;
            }
        }
        Ok((est, err))
    })?;

    let boxes = EstimatedBoxes {
        records: done
            .iter()
            .map(|(id, (b, _))| EstimatedBox {
                record_id: id.clone(),
                box3d: *b,
            })
            .collect(),
    };
    std::fs::write(out_file, serde_json::to_string_pretty(&boxes)?)?;

    // Vertex-error CSV for records with ground truth.
    let mut csv = String::from("record_id,mean_error_px,b0,b1,b2,b3,b4,b5,b6,b7\n");
    let mut have_errors = false;
    for (id, (_, err)) in &done {
        if let Some(per) = err {
            have_errors = true;
            let mean = per.iter().sum::<f64>() / per.len() as f64;
            csv.push_str(&format!(
                "{id},{mean:.4},{}\n",
                per.iter()
                    .map(|e| format!("{e:.4}"))
                    .collect::<Vec<_>>()
                    .join(",")
            ));
        }
    }
    if have_errors {
        let mut name = out_file
            .file_stem()
            .unwrap_or_default()
            .to_os_string();
        name.push(".errors.csv");
        std::fs::write(out_file.with_file_name(name), csv)?;
    }
    manifest.outputs = done.len();
    manifest.skipped = skipped;
    manifest.write(out_file)?;
    log::info!("estimated {} boxes", done.len());
    Ok(())
}

pub fn cmd_make_splits(
    annotations: &Path,
    mode: SplitMode,
    seed: u64,
    train_frac: f64,
    out_file: &Path,
) -> anyhow::Result<()> {
    let ann = load_annotations(annotations)?;
    let mut manifest = Manifest::new("make-splits", seed);
    manifest.add_input(annotations)?;
    let split = make_splits(&ann.records, mode, seed, train_frac)?;
    if let Some(parent) = out_file.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    split.save(out_file)?;
    manifest.outputs = 1;
    manifest.write(out_file)?;
    println!(
        "split {}: {} classes, {} train tracks, {} test tracks",
        split.name,
        split.classes.len(),
        split.train_tracks.len(),
        split.test_tracks.len()
    );
    Ok(())
}

pub fn cmd_stats(
    annotations: &Path,
    out_file: &Path,
    calib: Option<CameraCalib>,
) -> anyhow::Result<()> {
    let ann = load_annotations(annotations)?;
    let mut manifest = Manifest::new("stats", 0);
    manifest.add_input(annotations)?;
    let s = stats(&ann.records, calib.as_ref());
    if let Some(parent) = out_file.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(out_file, serde_json::to_string_pretty(&s)?)?;
    manifest.outputs = 1;
    manifest.write(out_file)?;
    println!(
        "{} records, {} classes, {} viewpoint samples",
        ann.records.len(),
        s.class_counts.len(),
        s.viewpoint_samples
    );
    Ok(())
}

pub fn cmd_validate(annotations: &Path, out_file: Option<&Path>) -> anyhow::Result<()> {
    let ann = load_annotations(annotations)?;
    let report = validate(&ann.records);
    println!(
        "images: {}\nvehicles: {}\nclasses: {}\nmakes: {}\ncameras: {}\nviolations: {}",
        report.images,
        report.vehicles,
        report.classes,
        report.makes,
        report.cameras,
        report.violations.len()
    );
    for v in report.violations.iter().take(50) {
        println!("  {}: {}", v.record_id, v.message);
    }
    if let Some(out) = out_file {
        let mut manifest = Manifest::new("validate", 0);
        manifest.add_input(annotations)?;
        std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
        manifest.outputs = 1;
        manifest.write(out)?;
    }
    Ok(())
}

pub fn cmd_eval_classification(
    annotations: &Path,
    split_file: &Path,
    probs_file: &Path,
    out_file: &Path,
) -> anyhow::Result<()> {
    let ann = load_annotations(annotations)?;
    let split = load_split(split_file)?;
    require_input(probs_file)?;
    let preds = bio::load_probs(probs_file)?;
    let mut manifest = Manifest::new("eval-classification", 0);
    manifest.add_input(annotations)?;
    manifest.add_input(split_file)?;
    manifest.add_input(probs_file)?;

    let (image_acc, track_acc) = track_accuracy(&preds, &ann.records, &split)?;
    println!("image accuracy: {image_acc:.4}\ntrack accuracy: {track_acc:.4}");
    std::fs::write(
        out_file,
        format!("metric,value\nimage_accuracy,{image_acc}\ntrack_accuracy,{track_acc}\n"),
    )?;
    manifest.outputs = 1;
    manifest.write(out_file)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_eval_verification(
    annotations: &Path,
    split_file: &Path,
    feats_file: Option<&Path>,
    feats_bxt: Option<&Path>,
    feats_ids: Option<&Path>,
    pairs: usize,
    seed: u64,
    out_file: &Path,
    plot_file: Option<&Path>,
) -> anyhow::Result<()> {
    let ann = load_annotations(annotations)?;
    let split = load_split(split_file)?;
    let mut manifest = Manifest::new("eval-verification", seed);
    manifest.add_input(annotations)?;
    manifest.add_input(split_file)?;

    let feats = match (feats_file, feats_bxt, feats_ids) {
        (Some(f), None, None) => {
            require_input(f)?;
            manifest.add_input(f)?;
            bio::load_feats(f)?
        }
        (None, Some(t), Some(i)) => {
            require_input(t)?;
            require_input(i)?;
            manifest.add_input(t)?;
            manifest.add_input(i)?;
            bio::load_feats_bxt(t, i)?
        }
        _ => bail!("provide either --feats or both --feats-bxt and --feats-ids"),
    };

    let track_pairs = sample_track_pairs(&ann.records, &split, pairs, 0.01, seed)?;
    let curve = verification(&track_pairs, &feats, &ann.records, seed)?;
    println!(
        "verification AP over {} pairs: {:.6}",
        track_pairs.len(),
        curve.average_precision
    );
    let mut csv = String::from("precision,recall\n");
    for (p, r) in &curve.points {
        csv.push_str(&format!("{p},{r}\n"));
    }
    csv.push_str(&format!("# average_precision,{}\n", curve.average_precision));
    std::fs::write(out_file, csv)?;
    if let Some(plot) = plot_file {
        draw::plot_pr_curve(&curve, 512).save(plot)?;
    }
    manifest.outputs = 1 + plot_file.is_some() as usize;
    manifest.write(out_file)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_eval_viewpoint_gap(
    annotations: &Path,
    split_file: &Path,
    preds_base_file: &Path,
    preds_mod_file: &Path,
    out_file: &Path,
    focal: Option<f64>,
    principal: Option<(f64, f64)>,
) -> anyhow::Result<()> {
    let ann = load_annotations(annotations)?;
    let split = load_split(split_file)?;
    require_input(preds_base_file)?;
    require_input(preds_mod_file)?;
    let preds_base = bio::load_probs(preds_base_file)?;
    let preds_mod = bio::load_probs(preds_mod_file)?;
    let mut manifest = Manifest::new("eval-viewpoint-gap", 0);
    for p in [annotations, split_file, preds_base_file, preds_mod_file] {
        manifest.add_input(p)?;
    }

    let train_set: std::collections::BTreeSet<&str> =
        split.train_tracks.iter().map(|s| s.as_str()).collect();
    let test_set: std::collections::BTreeSet<&str> =
        split.test_tracks.iter().map(|s| s.as_str()).collect();
    let train: Vec<Record> = ann
        .records
        .iter()
        .filter(|r| train_set.contains(r.track_id.as_str()))
        .cloned()
        .collect();
    let test: Vec<Record> = ann
        .records
        .iter()
        .filter(|r| test_set.contains(r.track_id.as_str()))
        .cloned()
        .collect();

    let calib = match (focal, principal) {
        (Some(f), Some((px, py))) => CameraCalib::new(Point2::new(px, py), f)?,
        (Some(f), None) => {
            let r = test
                .iter()
                .chain(train.iter())
                .next()
                .ok_or_else(|| anyhow!("empty split"))?;
            CameraCalib::new(r.bbox2d.center(), f)?
        }
        _ => {
            // Derive from the first record whose box yields a focal length.
            test.iter()
                .chain(train.iter())
                .filter_map(|r| {
                    let b = r.box3d.as_ref()?;
                    calib_from_box(b, r.bbox2d.center()).ok()
                })
                .next()
                .ok_or_else(|| anyhow!("no --focal given and no box yields a calibration"))?
        }
    };

    let bins = viewpoint_gap_analysis(
        &test,
        &train,
        &preds_base,
        &preds_mod,
        &split,
        &calib,
        &DEFAULT_GAP_BIN_EDGES,
    )?;
    let mut csv = String::from("lo_deg,hi_deg,images,share,improvement_pp\n");
    for b in &bins {
        csv.push_str(&format!(
            "{},{},{},{:.6},{:.4}\n",
            b.lo_deg, b.hi_deg, b.images, b.share, b.improvement_pp
        ));
        println!(
            "[{:>5.1}°, {:>5.1}°): {:>5.1}% of test images, improvement {:+.2} pp",
            b.lo_deg,
            b.hi_deg,
            b.share * 100.0,
            b.improvement_pp
        );
    }
    std::fs::write(out_file, csv)?;
    manifest.outputs = 1;
    manifest.write(out_file)?;
    Ok(())
}

/// Maps an error chain to the process exit code: missing inputs exit with 2.
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<MissingInput>().is_some() {
            return 2;
        }
        if let Some(BoxError::Io(io)) = cause.downcast_ref::<BoxError>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return 2;
            }
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return 2;
            }
        }
    }
    1
}
