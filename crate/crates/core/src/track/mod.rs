//! Trajectory production, chunk chaining and tracking evaluation.
//!
//! Long sequences are tracked chunk by chunk. Each chunk starts from the
//! previous chunk's final boxes, so chunks run strictly in order.

mod chain;
mod external;
pub mod hungarian;
mod mot;
mod naive;
mod oracle;

pub use chain::{chain_chunks, ChainOutcome};
pub use external::{run_external_tracker, ExternalTracker};
pub use hungarian::{hungarian, max_weight_matching, Assignment};
pub use mot::{evaluate_mot, render_mot_table, MotEvaluation, MotMeta, MotReport, MOSTLY_LOST, MOSTLY_TRACKED};
pub use naive::{naive_iou_tracker, NaiveIouTracker};
pub use oracle::OracleTracker;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::{parse_jsonl, trajectories_from_records, trajectories_to_records, TrackLine};
use crate::model::{SeedSet, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackRun {
    pub trajectories: Vec<Trajectory>,
    /// First global frame index of every chunk.
    pub chunk_boundaries: Vec<u32>,
    pub tracker_id: String,
}

impl TrackRun {
    pub fn trajectory(&self, identity: &str) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.identity == identity)
    }

    pub fn to_jsonl(&self) -> String {
        let mut lines =
            vec![TrackLine::Header { tracker_id: self.tracker_id.clone(), chunk_boundaries: self.chunk_boundaries.clone() }];
        lines.extend(trajectories_to_records(&self.trajectories).into_iter().map(TrackLine::Entry));
        crate::io::to_jsonl(&lines)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    /// Reads a tracks file. The header line is optional, so hand-written
    /// ground truth with only entries is accepted.
    pub fn read(path: &Path) -> Result<TrackRun> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let lines: Vec<TrackLine> = parse_jsonl(text.as_bytes(), path)?;
        let mut tracker_id = String::from("file");
        let mut chunk_boundaries = Vec::new();
        let mut records = Vec::new();
        for line in lines {
            match line {
                TrackLine::Header { tracker_id: t, chunk_boundaries: c } => {
                    tracker_id = t;
                    chunk_boundaries = c;
                }
                TrackLine::Entry(r) => records.push(r),
            }
        }
        Ok(TrackRun { trajectories: trajectories_from_records(records)?, chunk_boundaries, tracker_id })
    }
}

/// Frames of one chunk handed to a tracker.
#[derive(Debug, Clone)]
pub struct ChunkContext {
    pub chunk_id: u32,
    /// Global indices, ascending.
    pub frames: Vec<u32>,
    pub dir: Option<PathBuf>,
}

pub trait ChunkTracker {
    fn id(&self) -> &str;

    /// Tracks the seeded identities through one chunk.
    fn track_chunk(&mut self, chunk: &ChunkContext, seeds: &SeedSet) -> Result<Vec<Trajectory>>;
}

/// Runs `tracker` over the chunks in order, chaining seeds from each chunk's
/// final frames (`chain_window` = K) into the next.
pub fn run_chunked(
    tracker: &mut dyn ChunkTracker,
    chunks: &[ChunkContext],
    seeds: SeedSet,
    chain_window: u32,
) -> Result<TrackRun> {
    seeds.validate()?;
    let mut merged: BTreeMap<String, Trajectory> = BTreeMap::new();
    let mut seeds = seeds;
    let mut boundaries = Vec::new();
    for (k, chunk) in chunks.iter().enumerate() {
        let Some(&first) = chunk.frames.first() else { continue };
        boundaries.push(first);
        let result = tracker.track_chunk(chunk, &seeds)?;
        for t in &result {
            let dst = merged.entry(t.identity.clone()).or_insert_with(|| Trajectory::new(t.identity.clone()));
            for (&f, e) in &t.entries {
                dst.insert(f, e.clone());
            }
        }
        if k + 1 < chunks.len() {
            let end = *chunk.frames.last().expect("non-empty chunk");
            let outcome = chain_chunks(&result, end, chain_window)?;
            for name in &outcome.dropped {
                log::warn!("chunk {}: {name} absent from the final {chain_window} frame(s), dropped", chunk.chunk_id);
            }
            if outcome.seeds.seeds.is_empty() {
                return Err(Error::ChunkTracking {
                    chunk_id: chunk.chunk_id,
                    msg: "no identity survived to seed the next chunk".into(),
                });
            }
            seeds = outcome.seeds;
        }
    }
    Ok(TrackRun { trajectories: merged.into_values().collect(), chunk_boundaries: boundaries, tracker_id: tracker.id().into() })
}
