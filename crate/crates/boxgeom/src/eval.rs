//! Evaluation protocols over externally produced per-image predictions:
//! track-merged classification accuracy, same-type verification with
//! precision-recall/AP, and viewpoint-gap improvement analysis.

use crate::box3d::{ray_angle, viewpoint_3d, CameraCalib};
use crate::dataset::{Record, Split, SplitMode};
use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Per-record class probabilities and/or feature vectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    probs: BTreeMap<String, Vec<f64>>,
    feats: BTreeMap<String, Vec<f64>>,
}

impl PredictionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_probs(&mut self, record_id: &str, probs: Vec<f64>) -> Result<()> {
        if let Some(first) = self.probs.values().next() {
            if first.len() != probs.len() {
                return Err(Error::InvalidData(format!(
                    "probability vector length {} != {}",
                    probs.len(),
                    first.len()
                )));
            }
        }
        let mut sum = 0.0;
        for &p in &probs {
            if p.is_nan() || p < 0.0 {
                return Err(Error::InvalidData(format!("negative probability {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-4 {
            return Err(Error::InvalidData(format!(
                "probabilities for {record_id} sum to {sum}"
            )));
        }
        self.probs.insert(record_id.to_string(), probs);
        Ok(())
    }

    pub fn insert_feat(&mut self, record_id: &str, feat: Vec<f64>) -> Result<()> {
        if let Some(first) = self.feats.values().next() {
            if first.len() != feat.len() {
                return Err(Error::InvalidData(format!(
                    "feature vector length {} != {}",
                    feat.len(),
                    first.len()
                )));
            }
        }
        self.feats.insert(record_id.to_string(), feat);
        Ok(())
    }

    pub fn probs(&self, record_id: &str) -> Result<&[f64]> {
        self.probs
            .get(record_id)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::MissingPrediction(record_id.to_string()))
    }

    pub fn feat(&self, record_id: &str) -> Result<&[f64]> {
        self.feats
            .get(record_id)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::MissingPrediction(record_id.to_string()))
    }

    pub fn num_probs(&self) -> usize {
        self.probs.len()
    }

    pub fn num_feats(&self) -> usize {
        self.feats.len()
    }
}

/// Argmax with ties broken by the lowest class index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn split_mode(split: &Split) -> Result<SplitMode> {
    match split.name.as_str() {
        "hard" => Ok(SplitMode::Hard),
        "medium" => Ok(SplitMode::Medium),
        other => Err(Error::InvalidData(format!("unknown split name {other}"))),
    }
}

/// Single-image and track-merged accuracy on the split's test tracks. The
/// track prediction is the argmax of the mean probability vector across the
/// track's images.
pub fn track_accuracy(
    preds: &PredictionSet,
    records: &[Record],
    split: &Split,
) -> Result<(f64, f64)> {
    let mode = split_mode(split)?;
    let test_tracks: std::collections::BTreeSet<&str> =
        split.test_tracks.iter().map(|s| s.as_str()).collect();

    let mut image_hits = 0usize;
    let mut image_total = 0usize;
    // track -> (class index, running mean numerator, count)
    let mut track_sums: BTreeMap<&str, (usize, Vec<f64>, usize)> = BTreeMap::new();

    for r in records {
        if !test_tracks.contains(r.track_id.as_str()) {
            continue;
        }
        let class = split
            .class_index(&mode.class_key(&r.label))
            .ok_or_else(|| {
                Error::InvalidData(format!(
                    "record {} has a class outside the split",
                    r.record_id
                ))
            })?;
        let p = preds.probs(&r.record_id)?;
        image_total += 1;
        if argmax(p) == class {
            image_hits += 1;
        }
        let entry = track_sums
            .entry(&r.track_id)
            .or_insert_with(|| (class, vec![0.0; p.len()], 0));
        for (acc, &v) in entry.1.iter_mut().zip(p) {
            *acc += v;
        }
        entry.2 += 1;
    }
    if image_total == 0 {
        return Err(Error::InsufficientData("no test images".into()));
    }
    let mut track_hits = 0usize;
    for (class, sums, _count) in track_sums.values() {
        // Argmax of the mean equals argmax of the sum.
        if argmax(sums) == *class {
            track_hits += 1;
        }
    }
    Ok((
        image_hits as f64 / image_total as f64,
        track_hits as f64 / track_sums.len() as f64,
    ))
}

/// Cosine distance 1 - a.b/(|a||b|).
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (na * nb)
}

/// A verification pair: two tracks and whether they share the vehicle type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPair {
    pub track_a: String,
    pub track_b: String,
    pub same: bool,
}

/// Precision-recall curve with its average precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PRCurve {
    /// (precision, recall) points in order of non-decreasing recall.
    pub points: Vec<(f64, f64)>,
    pub average_precision: f64,
}

/// Number of image pairs sampled per track pair.
pub const IMAGE_PAIRS_PER_TRACK_PAIR: usize = 9;

/// Scores every track pair by the median cosine distance over nine image
/// pairs (uniform with replacement, deterministic under `seed` regardless of
/// evaluation order) and sweeps the score thresholds into a PR curve.
pub fn verification(
    pairs: &[TrackPair],
    feats: &PredictionSet,
    records: &[Record],
    seed: u64,
) -> Result<PRCurve> {
    let mut track_images: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in records {
        track_images
            .entry(&r.track_id)
            .or_default()
            .push(&r.record_id);
    }
    for imgs in track_images.values_mut() {
        imgs.sort();
    }

    let mut scored: Vec<(f64, bool)> = Vec::with_capacity(pairs.len());
    for (idx, pair) in pairs.iter().enumerate() {
        let a_imgs = track_images.get(pair.track_a.as_str()).ok_or_else(|| {
            Error::InvalidData(format!("unknown track {}", pair.track_a))
        })?;
        let b_imgs = track_images.get(pair.track_b.as_str()).ok_or_else(|| {
            Error::InvalidData(format!("unknown track {}", pair.track_b))
        })?;
        // Per-pair stream: deterministic regardless of worker partitioning.
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (idx as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut dists = Vec::with_capacity(IMAGE_PAIRS_PER_TRACK_PAIR);
        for _ in 0..IMAGE_PAIRS_PER_TRACK_PAIR {
            let ia = a_imgs[rng.gen_range(0..a_imgs.len())];
            let ib = b_imgs[rng.gen_range(0..b_imgs.len())];
            let fa = feats.feat(ia)?;
            let fb = feats.feat(ib)?;
            let zero = |v: &[f64]| v.iter().all(|x| *x == 0.0);
            if zero(fa) {
                return Err(Error::ZeroVector(ia.to_string()));
            }
            if zero(fb) {
                return Err(Error::ZeroVector(ib.to_string()));
            }
            dists.push(cosine_distance(fa, fb));
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = dists[IMAGE_PAIRS_PER_TRACK_PAIR / 2];
        scored.push((median, pair.same));
    }
    pr_curve_from_scores(&scored)
}

/// Threshold sweep over pair scores (smaller score = predicted same). Tied
/// scores enter the curve together; AP is the stepwise area under the curve.
pub fn pr_curve_from_scores(scored: &[(f64, bool)]) -> Result<PRCurve> {
    let total_pos = scored.iter().filter(|(_, same)| *same).count();
    if scored.is_empty() || total_pos == 0 {
        return Err(Error::InsufficientData(
            "verification needs at least one positive pair".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&i, &j| {
        scored[i]
            .0
            .partial_cmp(&scored[j].0)
            .unwrap()
            .then(i.cmp(&j))
    });

    let mut points = Vec::new();
    let mut tp = 0usize;
    let mut accepted = 0usize;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    let mut k = 0usize;
    while k < order.len() {
        // Consume the whole tie group.
        let score = scored[order[k]].0;
        while k < order.len() && scored[order[k]].0 == score {
            if scored[order[k]].1 {
                tp += 1;
            }
            accepted += 1;
            k += 1;
        }
        let precision = tp as f64 / accepted as f64;
        let recall = tp as f64 / total_pos as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push((precision, recall));
    }
    Ok(PRCurve {
        points,
        average_precision: ap,
    })
}

/// Samples track pairs from the split's test tracks with stratification:
/// positives (same class) are topped up to at least `min_positive_frac` of
/// the requested count when the class structure allows it.
pub fn sample_track_pairs(
    records: &[Record],
    split: &Split,
    count: usize,
    min_positive_frac: f64,
    seed: u64,
) -> Result<Vec<TrackPair>> {
    let mode = split_mode(split)?;
    let mut track_class: BTreeMap<&str, String> = BTreeMap::new();
    for r in records {
        track_class
            .entry(&r.track_id)
            .or_insert_with(|| mode.class_key(&r.label));
    }
    let tracks: Vec<&String> = split
        .test_tracks
        .iter()
        .filter(|t| track_class.contains_key(t.as_str()))
        .collect();
    if tracks.len() < 2 {
        return Err(Error::InsufficientData("need >= 2 test tracks".into()));
    }
    let mut by_class: BTreeMap<&str, Vec<&String>> = BTreeMap::new();
    for t in &tracks {
        by_class
            .entry(track_class[t.as_str()].as_str())
            .or_default()
            .push(t);
    }
    let multi_classes: Vec<&str> = by_class
        .iter()
        .filter(|(_, v)| v.len() >= 2)
        .map(|(k, _)| *k)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(count);
    let want_pos = (count as f64 * min_positive_frac).ceil() as usize;
    let mut positives = 0usize;
    for i in 0..count {
        let force_positive = positives + (count - i) <= want_pos
            || (i >= count - want_pos && positives < want_pos);
        let (a, b) = if force_positive && !multi_classes.is_empty() {
            let class = multi_classes[rng.gen_range(0..multi_classes.len())];
            let members = &by_class[class];
            let a = members[rng.gen_range(0..members.len())];
            let mut b = members[rng.gen_range(0..members.len())];
            while b == a && members.len() > 1 {
                b = members[rng.gen_range(0..members.len())];
            }
            (a, b)
        } else {
            let a = tracks[rng.gen_range(0..tracks.len())];
            let mut b = tracks[rng.gen_range(0..tracks.len())];
            while b == a {
                b = tracks[rng.gen_range(0..tracks.len())];
            }
            (a, b)
        };
        let same = track_class[a.as_str()] == track_class[b.as_str()];
        if same {
            positives += 1;
        }
        pairs.push(TrackPair {
            track_a: a.to_string(),
            track_b: b.to_string(),
            same,
        });
    }
    if positives == 0 {
        return Err(Error::InsufficientData(
            "no positive pairs could be sampled".into(),
        ));
    }
    Ok(pairs)
}

/// One row of the viewpoint-gap improvement table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapBin {
    pub lo_deg: f64,
    pub hi_deg: f64,
    /// Fraction of test images falling in this bin.
    pub share: f64,
    /// accuracy(modified) - accuracy(base) in percent points.
    pub improvement_pp: f64,
    pub images: usize,
}

/// Default angular bin edges in degrees.
pub const DEFAULT_GAP_BIN_EDGES: [f64; 5] = [0.0, 2.0, 5.0, 10.0, 180.0];

/// For each test image, finds the smallest angular viewpoint difference to
/// any training image, bins the test set by that gap, and reports the
/// per-bin accuracy improvement of the modified predictions over the base.
pub fn viewpoint_gap_analysis(
    test_records: &[Record],
    train_records: &[Record],
    preds_base: &PredictionSet,
    preds_mod: &PredictionSet,
    split: &Split,
    calib: &CameraCalib,
    bin_edges: &[f64],
) -> Result<Vec<GapBin>> {
    if bin_edges.len() < 2 {
        return Err(Error::InvalidData("need >= 2 bin edges".into()));
    }
    let mode = split_mode(split)?;
    let mut train_rays = Vec::with_capacity(train_records.len());
    for r in train_records {
        let b = r.box3d.as_ref().ok_or_else(|| {
            Error::InvalidData(format!("record {} lacks a 3D box", r.record_id))
        })?;
        train_rays.push(viewpoint_3d(b, calib)?);
    }
    if train_rays.is_empty() {
        return Err(Error::InsufficientData("no training records".into()));
    }

    let nbins = bin_edges.len() - 1;
    let mut hits_base = vec![0usize; nbins];
    let mut hits_mod = vec![0usize; nbins];
    let mut totals = vec![0usize; nbins];
    let mut total_images = 0usize;

    for r in test_records {
        let b = r.box3d.as_ref().ok_or_else(|| {
            Error::InvalidData(format!("record {} lacks a 3D box", r.record_id))
        })?;
        let w = viewpoint_3d(b, calib)?;
        let gap_deg = train_rays
            .iter()
            .map(|t| ray_angle(w, *t).to_degrees())
            .fold(f64::INFINITY, f64::min);
        let mut bin = nbins - 1;
        for i in 0..nbins {
            if gap_deg >= bin_edges[i] && gap_deg < bin_edges[i + 1] {
                bin = i;
                break;
            }
        }
        let class = split
            .class_index(&mode.class_key(&r.label))
            .ok_or_else(|| {
                Error::InvalidData(format!(
                    "record {} has a class outside the split",
                    r.record_id
                ))
            })?;
        totals[bin] += 1;
        total_images += 1;
        if argmax(preds_base.probs(&r.record_id)?) == class {
            hits_base[bin] += 1;
        }
        if argmax(preds_mod.probs(&r.record_id)?) == class {
            hits_mod[bin] += 1;
        }
    }
    if total_images == 0 {
        return Err(Error::InsufficientData("no test records".into()));
    }
    let mut out = Vec::with_capacity(nbins);
    for i in 0..nbins {
        let improvement = if totals[i] > 0 {
            (hits_mod[i] as f64 - hits_base[i] as f64) / totals[i] as f64 * 100.0
        } else {
            0.0
        };
        out.push(GapBin {
            lo_deg: bin_edges[i],
            hi_deg: bin_edges[i + 1],
            share: totals[i] as f64 / total_images as f64,
            improvement_pp: improvement,
            images: totals[i],
        });
    }
    Ok(out)
}
