//! File interchange: JSON-lines prediction formats and the BXT1 dense
//! tensor container.
//!
//! BXT1 layout (all integers little-endian): magic `BXT1`, u8 dtype code
//! (0 = u8, 1 = f32), u8 ndim, ndim x u32 dims, then the row-major payload.

use crate::error::{Error, Result};
use crate::estimate::{AngleTriple, DirectionBins};
use crate::eval::PredictionSet;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// One JSONL row of direction-bin predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinsRow {
    pub record_id: String,
    pub bins: [Vec<f64>; 3],
}

/// One JSONL row of ground-truth direction angles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnglesRow {
    pub record_id: String,
    /// [theta_f, theta_s, theta_r] in degrees.
    pub angles: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProbsRow {
    record_id: String,
    probs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FeatRow {
    record_id: String,
    feat: Vec<f64>,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| {
            Error::InvalidData(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        out.push(row);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut file, row)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

/// Loads `{record_id, bins: [[60],[60],[60]]}` JSONL into validated bins.
pub fn load_direction_bins(path: &Path) -> Result<Vec<(String, DirectionBins)>> {
    let rows: Vec<BinsRow> = read_jsonl(path)?;
    rows.into_iter()
        .map(|r| Ok((r.record_id, DirectionBins::new(r.bins)?)))
        .collect()
}

pub fn save_direction_bins(path: &Path, rows: &[(String, DirectionBins)]) -> Result<()> {
    let out: Vec<BinsRow> = rows
        .iter()
        .map(|(id, b)| BinsRow {
            record_id: id.clone(),
            bins: b.probs.clone(),
        })
        .collect();
    write_jsonl(path, &out)
}

/// Loads `{record_id, angles: [f, s, r]}` JSONL.
pub fn load_gt_angles(path: &Path) -> Result<Vec<(String, AngleTriple)>> {
    let rows: Vec<AnglesRow> = read_jsonl(path)?;
    rows.into_iter()
        .map(|r| {
            Ok((
                r.record_id,
                AngleTriple::new(r.angles[0], r.angles[1], r.angles[2])?,
            ))
        })
        .collect()
}

pub fn save_gt_angles(path: &Path, rows: &[(String, AngleTriple)]) -> Result<()> {
    let out: Vec<AnglesRow> = rows
        .iter()
        .map(|(id, a)| AnglesRow {
            record_id: id.clone(),
            angles: [a.theta_f, a.theta_s, a.theta_r],
        })
        .collect();
    write_jsonl(path, &out)
}

/// Loads `{record_id, probs: [...]}` JSONL into a prediction set.
pub fn load_probs(path: &Path) -> Result<PredictionSet> {
    let rows: Vec<ProbsRow> = read_jsonl(path)?;
    let mut set = PredictionSet::new();
    for r in rows {
        set.insert_probs(&r.record_id, r.probs)?;
    }
    Ok(set)
}

pub fn save_probs(path: &Path, rows: &[(String, Vec<f64>)]) -> Result<()> {
    let out: Vec<ProbsRow> = rows
        .iter()
        .map(|(id, p)| ProbsRow {
            record_id: id.clone(),
            probs: p.clone(),
        })
        .collect();
    write_jsonl(path, &out)
}

/// Loads `{record_id, feat: [...]}` JSONL into a prediction set.
pub fn load_feats(path: &Path) -> Result<PredictionSet> {
    let rows: Vec<FeatRow> = read_jsonl(path)?;
    let mut set = PredictionSet::new();
    for r in rows {
        set.insert_feat(&r.record_id, r.feat)?;
    }
    Ok(set)
}

pub fn save_feats(path: &Path, rows: &[(String, Vec<f64>)]) -> Result<()> {
    let out: Vec<FeatRow> = rows
        .iter()
        .map(|(id, f)| FeatRow {
            record_id: id.clone(),
            feat: f.clone(),
        })
        .collect();
    write_jsonl(path, &out)
}

/// Dense tensor payload.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    U8(Vec<u8>),
    F32(Vec<f32>),
}

/// A dense row-major tensor with u32 dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    pub dims: Vec<u32>,
    pub data: TensorData,
}

const BXT_MAGIC: &[u8; 4] = b"BXT1";

impl DenseTensor {
    pub fn len(&self) -> usize {
        match &self.data {
            TensorData::U8(v) => v.len(),
            TensorData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn expected_len(dims: &[u32]) -> usize {
        dims.iter().map(|&d| d as usize).product()
    }

    pub fn new(dims: Vec<u32>, data: TensorData) -> Result<Self> {
        let t = Self { dims, data };
        if Self::expected_len(&t.dims) != t.len() {
            return Err(Error::InvalidData(format!(
                "tensor payload length {} does not match dims {:?}",
                t.len(),
                t.dims
            )));
        }
        Ok(t)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(BXT_MAGIC)?;
        let code: u8 = match &self.data {
            TensorData::U8(_) => 0,
            TensorData::F32(_) => 1,
        };
        w.write_all(&[code, self.dims.len() as u8])?;
        for d in &self.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        match &self.data {
            TensorData::U8(v) => w.write_all(v)?,
            TensorData::F32(v) => {
                for x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BXT_MAGIC {
            return Err(Error::InvalidData(format!(
                "{}: bad magic {:?}",
                path.display(),
                magic
            )));
        }
        let mut head = [0u8; 2];
        r.read_exact(&mut head)?;
        let (code, ndim) = (head[0], head[1] as usize);
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            dims.push(u32::from_le_bytes(b));
        }
        let n = Self::expected_len(&dims);
        let data = match code {
            0 => {
                let mut v = vec![0u8; n];
                r.read_exact(&mut v)?;
                TensorData::U8(v)
            }
            1 => {
                let mut raw = vec![0u8; n * 4];
                r.read_exact(&mut raw)?;
                let v = raw
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                TensorData::F32(v)
            }
            other => {
                return Err(Error::InvalidData(format!("unknown dtype code {other}")))
            }
        };
        DenseTensor::new(dims, data)
    }
}

/// Loads features from a BXT1 tensor (dims [n, dim], f32) and a sidecar text
/// file with one record id per line in row order.
pub fn load_feats_bxt(tensor_path: &Path, ids_path: &Path) -> Result<PredictionSet> {
    let tensor = DenseTensor::read(tensor_path)?;
    if tensor.dims.len() != 2 {
        return Err(Error::InvalidData(format!(
            "feature tensor must be 2-D, got dims {:?}",
            tensor.dims
        )));
    }
    let data = match &tensor.data {
        TensorData::F32(v) => v,
        TensorData::U8(_) => {
            return Err(Error::InvalidData("feature tensor must be f32".into()))
        }
    };
    let ids: Vec<String> = std::fs::read_to_string(ids_path)?
        .lines()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    let (n, dim) = (tensor.dims[0] as usize, tensor.dims[1] as usize);
    if ids.len() != n {
        return Err(Error::InvalidData(format!(
            "{} ids but tensor has {} rows",
            ids.len(),
            n
        )));
    }
    let mut set = PredictionSet::new();
    for (i, id) in ids.iter().enumerate() {
        let row = data[i * dim..(i + 1) * dim].iter().map(|&x| x as f64).collect();
        set.insert_feat(id, row)?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::NUM_BINS;

    #[test]
    fn bxt_round_trip_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bxt");
        let t = DenseTensor::new(
            vec![2, 3],
            TensorData::F32(vec![1.0, -2.5, 3.25, 0.0, 1e-4, 9.0]),
        )
        .unwrap();
        t.write(&path).unwrap();
        assert_eq!(DenseTensor::read(&path).unwrap(), t);
    }

    #[test]
    fn bxt_golden_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.bxt");
        let t = DenseTensor::new(vec![1, 2], TensorData::U8(vec![7, 255])).unwrap();
        t.write(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(
            bytes,
            vec![b'B', b'X', b'T', b'1', 0, 2, 1, 0, 0, 0, 2, 0, 0, 0, 7, 255]
        );
    }

    #[test]
    fn bxt_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bxt");
        std::fs::write(&path, b"NOPE....").unwrap();
        assert!(DenseTensor::read(&path).is_err());
    }

    #[test]
    fn jsonl_probes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        save_probs(
            &path,
            &[
                ("a".into(), vec![0.25, 0.75]),
                ("b".into(), vec![1.0, 0.0]),
            ],
        )
        .unwrap();
        let set = load_probs(&path).unwrap();
        assert_eq!(set.probs("a").unwrap(), &[0.25, 0.75]);
        assert_eq!(set.num_probs(), 2);
    }

    #[test]
    fn jsonl_rejects_invalid_probs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        std::fs::write(&path, "{\"record_id\":\"a\",\"probs\":[0.5,0.1]}\n").unwrap();
        assert!(load_probs(&path).is_err());
    }

    #[test]
    fn bins_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bins.jsonl");
        let mut row = vec![0.0; NUM_BINS];
        row[12] = 1.0;
        let bins =
            DirectionBins::new([row.clone(), row.clone(), row]).unwrap();
        save_direction_bins(&path, &[("r0".into(), bins.clone())]).unwrap();
        let back = load_direction_bins(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].1, bins);
    }

    #[test]
    fn feats_bxt_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let tp = dir.path().join("f.bxt");
        let ip = dir.path().join("f.ids");
        DenseTensor::new(vec![2, 3], TensorData::F32(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]))
            .unwrap()
            .write(&tp)
            .unwrap();
        std::fs::write(&ip, "rec_a\nrec_b\n").unwrap();
        let set = load_feats_bxt(&tp, &ip).unwrap();
        assert_eq!(set.feat("rec_b").unwrap(), &[0.0, 1.0, 0.0]);
    }
}
