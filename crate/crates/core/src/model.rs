//! Domain records shared between stages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Mask};

/// A frame in a sequence layout. `global_index` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRef {
    pub global_index: u32,
    pub chunk_id: u32,
    pub filename: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "frame_index")]
    pub frame: u32,
    pub label: String,
    pub score: f64,
    #[serde(flatten)]
    pub bbox: BBox,
}

impl Detection {
    pub fn new(frame: u32, label: impl Into<String>, score: f64, bbox: BBox) -> Self {
        Detection { frame, label: label.into(), score, bbox }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::InvalidInput(format!("detection score {} outside [0, 1] at frame {}", self.score, self.frame)));
        }
        self.bbox.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackEntry {
    pub bbox: BBox,
    pub mask: Option<Mask>,
}

impl TrackEntry {
    pub fn from_bbox(bbox: BBox) -> Self {
        TrackEntry { bbox, mask: None }
    }
}

/// Time-indexed boxes (and optional masks) of one identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub identity: String,
    pub entries: BTreeMap<u32, TrackEntry>,
}

impl Trajectory {
    pub fn new(identity: impl Into<String>) -> Self {
        Trajectory { identity: identity.into(), entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, frame: u32, entry: TrackEntry) -> Option<TrackEntry> {
        self.entries.insert(frame, entry)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<(u32, &TrackEntry)> {
        self.entries.iter().next_back().map(|(&f, e)| (f, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    AutoFiltered,
    HumanReviewed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub object_name: String,
    #[serde(flatten)]
    pub bbox: BBox,
    /// Frame the box was observed in.
    #[serde(rename = "frame_index")]
    pub frame: u32,
}

/// Boxes that initialize tracking for one chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    pub frame: u32,
    pub seeds: Vec<Seed>,
    pub provenance: Provenance,
}

impl SeedSet {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::NoSeeds);
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.seeds {
            s.bbox.validate()?;
            if !seen.insert(s.object_name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate seed name {}", s.object_name)));
            }
        }
        Ok(())
    }

    /// Clamps every box to the frame.
    pub fn clamp_to(&mut self, width: f64, height: f64) {
        for s in &mut self.seeds {
            s.bbox = s.bbox.clamp_to(width, height);
        }
    }
}
