//! Annotation schema, validation, camera-disjoint split construction, and
//! dataset statistics.

use crate::box3d::{viewpoint_azimuth_elevation, Box3D, CameraCalib};
use crate::error::{Error, Result};
use crate::geom::Rect;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Fine-grained vehicle type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label {
    pub make: String,
    pub model: String,
    pub submodel: String,
    pub year: i32,
}

impl Label {
    /// Class key including the model year.
    pub fn hard_key(&self) -> String {
        format!("{}|{}|{}|{}", self.make, self.model, self.submodel, self.year)
    }

    /// Class key with model years merged.
    pub fn medium_key(&self) -> String {
        format!("{}|{}|{}", self.make, self.model, self.submodel)
    }
}

/// One annotated vehicle observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub record_id: String,
    pub image_path: String,
    pub camera_id: String,
    pub track_id: String,
    /// [x, y, w, h] in image pixels.
    pub bbox2d: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box3d: Option<Box3D>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<String>,
    pub label: Label,
}

/// Top-level annotation file: a single JSON object with a records array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Annotations {
    pub records: Vec<Record>,
}

impl Annotations {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let data = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&data)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let data = serde_json::to_string_pretty(self)?;
        std::fs::write(path, data)?;
        Ok(())
    }
}

/// Split mode: `hard` keeps model years apart, `medium` merges them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Hard,
    Medium,
}

impl SplitMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Hard => "hard",
            Self::Medium => "medium",
        }
    }

    pub fn class_key(&self, label: &Label) -> String {
        match self {
            Self::Hard => label.hard_key(),
            Self::Medium => label.medium_key(),
        }
    }
}

/// Camera-disjoint train/test partition over tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub name: String,
    pub train_tracks: Vec<String>,
    pub test_tracks: Vec<String>,
    /// Sorted class keys; the position of a key is its class index in every
    /// prediction vector.
    pub classes: Vec<String>,
}

impl Split {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let data = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&data)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn class_index(&self, key: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == key)
    }
}

/// Validation report: structural violations plus corpus counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub images: usize,
    pub vehicles: usize,
    pub classes: usize,
    pub makes: usize,
    pub cameras: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub record_id: String,
    pub message: String,
}

/// Checks the record invariants that are verifiable without touching image
/// files: bbox sanity, box validity, unique record ids, and that each track
/// maps to exactly one camera and one label.
pub fn validate(records: &[Record]) -> ValidationReport {
    let mut report = ValidationReport {
        images: records.len(),
        ..Default::default()
    };
    let mut track_camera: BTreeMap<&str, &str> = BTreeMap::new();
    let mut track_label: BTreeMap<&str, &Label> = BTreeMap::new();
    let mut seen_ids: BTreeSet<&str> = BTreeSet::new();
    let mut classes: BTreeSet<String> = BTreeSet::new();
    let mut makes: BTreeSet<&str> = BTreeSet::new();
    let mut cameras: BTreeSet<&str> = BTreeSet::new();
    let mut tracks: BTreeSet<&str> = BTreeSet::new();

    for r in records {
        if !seen_ids.insert(&r.record_id) {
            report.violations.push(Violation {
                record_id: r.record_id.clone(),
                message: "duplicate record_id".into(),
            });
        }
        if r.bbox2d.w <= 0.0 || r.bbox2d.h <= 0.0 {
            report.violations.push(Violation {
                record_id: r.record_id.clone(),
                message: format!("bbox has non-positive size {}x{}", r.bbox2d.w, r.bbox2d.h),
            });
        }
        match track_camera.get(r.track_id.as_str()) {
            Some(&cam) if cam != r.camera_id => report.violations.push(Violation {
                record_id: r.record_id.clone(),
                message: format!(
                    "track {} spans cameras {} and {}",
                    r.track_id, cam, r.camera_id
                ),
            }),
            _ => {
                track_camera.insert(&r.track_id, &r.camera_id);
            }
        }
        match track_label.get(r.track_id.as_str()) {
            Some(&lab) if lab != &r.label => report.violations.push(Violation {
                record_id: r.record_id.clone(),
                message: format!("track {} has conflicting labels", r.track_id),
            }),
            _ => {
                track_label.insert(&r.track_id, &r.label);
            }
        }
        if let Some(b) = &r.box3d {
            if let Err(e) = b.validate() {
                report.violations.push(Violation {
                    record_id: r.record_id.clone(),
                    message: format!("invalid 3D box: {e}"),
                });
            }
        }
        classes.insert(r.label.hard_key());
        makes.insert(&r.label.make);
        cameras.insert(&r.camera_id);
        tracks.insert(&r.track_id);
    }
    report.vehicles = tracks.len();
    report.classes = classes.len();
    report.makes = makes.len();
    report.cameras = cameras.len();
    report
}

/// Minimum training tracks per class for the class to survive.
pub const MIN_TRAIN_TRACKS: usize = 15;
/// Minimum testing tracks per class.
pub const MIN_TEST_TRACKS: usize = 1;

/// Randomly partitions cameras into train/test sets (train fraction of the
/// camera list, at least one camera on each side), assigns whole tracks by
/// their camera, and drops classes below the track thresholds. Deterministic
/// under a fixed seed.
pub fn make_splits(
    records: &[Record],
    mode: SplitMode,
    seed: u64,
    train_fraction: f64,
) -> Result<Split> {
    let mut cameras: Vec<&str> = records
        .iter()
        .map(|r| r.camera_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if cameras.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need >= 2 cameras, got {}",
            cameras.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cameras.shuffle(&mut rng);
    let n_train = ((cameras.len() as f64 * train_fraction).round() as usize)
        .clamp(1, cameras.len() - 1);
    let train_cams: BTreeSet<&str> = cameras[..n_train].iter().copied().collect();

    // track -> (camera, class key)
    let mut track_info: BTreeMap<&str, (&str, String)> = BTreeMap::new();
    for r in records {
        track_info
            .entry(&r.track_id)
            .or_insert_with(|| (r.camera_id.as_str(), mode.class_key(&r.label)));
    }

    let mut per_class: BTreeMap<String, (Vec<&str>, Vec<&str>)> = BTreeMap::new();
    for (track, (cam, class)) in &track_info {
        let entry = per_class.entry(class.clone()).or_default();
        if train_cams.contains(cam) {
            entry.0.push(track);
        } else {
            entry.1.push(track);
        }
    }

    let mut split = Split {
        name: mode.name().to_string(),
        train_tracks: Vec::new(),
        test_tracks: Vec::new(),
        classes: Vec::new(),
    };
    for (class, (train, test)) in &per_class {
        if train.len() >= MIN_TRAIN_TRACKS && test.len() >= MIN_TEST_TRACKS {
            split.classes.push(class.clone());
            split.train_tracks.extend(train.iter().map(|t| t.to_string()));
            split.test_tracks.extend(test.iter().map(|t| t.to_string()));
        }
    }
    if split.classes.is_empty() {
        return Err(Error::InsufficientData(
            "no class satisfies the 15 train / 1 test track thresholds".into(),
        ));
    }
    split.train_tracks.sort();
    split.test_tracks.sort();
    Ok(split)
}

/// Histogram with fixed-width bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, bin_width: f64, bins: usize) -> Self {
        Self {
            lo,
            bin_width,
            counts: vec![0; bins],
        }
    }

    pub fn add(&mut self, v: f64) {
        let idx = ((v - self.lo) / self.bin_width).floor();
        if idx >= 0.0 && (idx as usize) < self.counts.len() {
            self.counts[idx as usize] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Dataset statistics: 2D bbox dimensions, per-class sample counts, and
/// azimuth/elevation distributions where a box and calibration are available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub bbox_width: Histogram,
    pub bbox_height: Histogram,
    pub class_counts: BTreeMap<String, u64>,
    /// 12 azimuth bins of 30°, bin 0 centered on the frontal viewpoint
    /// (edges at -15° and +15°).
    pub azimuth: Histogram,
    /// 9 elevation bins of 10° covering [0°, 90°].
    pub elevation: Histogram,
    pub viewpoint_samples: usize,
}

/// Azimuth histogram bin index for an azimuth in [0, 360): 30° bins centered
/// on 0°, 30°, ...
pub fn azimuth_bin(az_deg: f64) -> usize {
    (((az_deg + 15.0).rem_euclid(360.0)) / 30.0).floor() as usize % 12
}

/// Computes corpus statistics. `calib` supplies the camera model for
/// viewpoint histograms; records without a 3D box are skipped there.
pub fn stats(records: &[Record], calib: Option<&CameraCalib>) -> DatasetStats {
    let mut out = DatasetStats {
        bbox_width: Histogram::new(0.0, 16.0, 64),
        bbox_height: Histogram::new(0.0, 16.0, 64),
        class_counts: BTreeMap::new(),
        azimuth: Histogram::new(0.0, 30.0, 12),
        elevation: Histogram::new(0.0, 10.0, 9),
        viewpoint_samples: 0,
    };
    for r in records {
        out.bbox_width.add(r.bbox2d.w);
        out.bbox_height.add(r.bbox2d.h);
        *out.class_counts.entry(r.label.hard_key()).or_default() += 1;
        if let Some(b) = &r.box3d {
            let calib = match calib {
                Some(c) => Ok(*c),
                // Principal point defaults to the 2D bbox surroundings'
                // center when no calibration is given; focal from the box's
                // own vanishing points.
                None => crate::box3d::calib_from_box(b, r.bbox2d.center()),
            };
            if let Ok(c) = calib {
                if let Ok((az, el)) = viewpoint_azimuth_elevation(b, &c) {
                    out.azimuth.counts[azimuth_bin(az)] += 1;
                    out.elevation.add(el);
                    out.viewpoint_samples += 1;
                }
            }
        }
    }
    out
}
