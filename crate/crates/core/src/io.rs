//! Line-delimited JSON files and the on-disk record formats built on them.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Mask};
use crate::model::{Detection, Provenance, Seed, SeedSet, TrackEntry, Trajectory};

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(BufReader::new(file), path)
}

pub fn parse_jsonl<T: DeserializeOwned>(reader: impl BufRead, path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(to_jsonl(records).as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    let dets: Vec<Detection> = read_jsonl(path)?;
    for d in &dets {
        d.validate()?;
    }
    Ok(dets)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    #[serde(flatten)]
    pub seed: Seed,
    pub provenance: Provenance,
}

pub fn seeds_to_records(set: &SeedSet) -> Vec<SeedRecord> {
    set.seeds.iter().map(|s| SeedRecord { seed: s.clone(), provenance: set.provenance }).collect()
}

pub fn seeds_from_records(records: Vec<SeedRecord>) -> Result<SeedSet> {
    let provenance = match records.first() {
        Some(r) => r.provenance,
        None => return Err(Error::NoSeeds),
    };
    if records.iter().any(|r| r.provenance != provenance) {
        return Err(Error::InvalidInput("seeds file mixes provenances".into()));
    }
    let frame = records.iter().map(|r| r.seed.frame).max().unwrap_or(1);
    let set = SeedSet { frame, seeds: records.into_iter().map(|r| r.seed).collect(), provenance };
    set.validate()?;
    Ok(set)
}

pub fn write_seeds(path: &Path, set: &SeedSet) -> Result<()> {
    write_jsonl(path, &seeds_to_records(set))
}

pub fn read_seeds(path: &Path) -> Result<SeedSet> {
    seeds_from_records(read_jsonl(path)?)
}

/// One line of a tracks file: a header describing the run, or one entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrackLine {
    Header { tracker_id: String, chunk_boundaries: Vec<u32> },
    Entry(TrackRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub frame_index: u32,
    pub identity: String,
    #[serde(flatten)]
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Mask>,
}

/// Per-frame tracker output: one mask for one identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub frame_index: u32,
    pub identity: String,
    pub width: u32,
    pub height: u32,
    pub counts: Vec<u32>,
}

impl MaskRecord {
    pub fn mask(&self) -> Mask {
        Mask { width: self.width, height: self.height, counts: self.counts.clone() }
    }
}

pub fn trajectories_to_records(trajectories: &[Trajectory]) -> Vec<TrackRecord> {
    let mut out: Vec<TrackRecord> = trajectories
        .iter()
        .flat_map(|t| {
            t.entries.iter().map(move |(&f, e)| TrackRecord {
                frame_index: f,
                identity: t.identity.clone(),
                bbox: e.bbox,
                mask: e.mask.clone(),
            })
        })
        .collect();
    out.sort_by(|a, b| (a.frame_index, &a.identity).cmp(&(b.frame_index, &b.identity)));
    out
}

/// Groups records by identity; identities come out sorted by name.
pub fn trajectories_from_records(records: Vec<TrackRecord>) -> Result<Vec<Trajectory>> {
    let mut by_id: std::collections::BTreeMap<String, Trajectory> = Default::default();
    for r in records {
        r.bbox.validate()?;
        let t = by_id.entry(r.identity.clone()).or_insert_with(|| Trajectory::new(r.identity.clone()));
        if t.insert(r.frame_index, TrackEntry { bbox: r.bbox, mask: r.mask }).is_some() {
            return Err(Error::InvalidInput(format!("identity {} has two entries at frame {}", r.identity, r.frame_index)));
        }
    }
    Ok(by_id.into_values().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub frame_index: u32,
    #[serde(flatten)]
    pub bbox: BBox,
}

/// Boxes without identities, e.g. detection ground truth. Track files are
/// accepted as well since they carry the same geometry.
pub fn read_gt_boxes(path: &Path) -> Result<Vec<GtBox>> {
    let boxes: Vec<GtBox> = read_jsonl(path)?;
    for b in &boxes {
        b.bbox.validate()?;
    }
    Ok(boxes)
}
