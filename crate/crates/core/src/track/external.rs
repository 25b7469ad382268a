use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{ChunkContext, ChunkTracker};
use crate::command;
use crate::error::{Error, Result};
use crate::geometry::Mask;
use crate::io::{read_jsonl, write_seeds, MaskRecord};
use crate::model::{SeedSet, TrackEntry, Trajectory};

/// Invokes an external tracker on one chunk directory.
///
/// The template receives `{chunk_dir}`, `{seeds_file}` and `{out_file}`; the
/// command writes one mask record per (frame, identity) to `{out_file}`.
/// Returns frame -> identity -> mask.
pub fn run_external_tracker(
    cmd_template: &str,
    chunk_id: u32,
    chunk_dir: &Path,
    seeds: &SeedSet,
    work_dir: &Path,
) -> Result<BTreeMap<u32, BTreeMap<String, Mask>>> {
    let fail = |msg: String| Error::ChunkTracking { chunk_id, msg };
    std::fs::create_dir_all(work_dir).map_err(|e| Error::io(work_dir, e))?;
    let seeds_file = work_dir.join(format!("seeds_chunk_{chunk_id:03}.jsonl"));
    let out_file = work_dir.join(format!("masks_chunk_{chunk_id:03}.jsonl"));
    write_seeds(&seeds_file, seeds)?;
    if out_file.exists() {
        std::fs::remove_file(&out_file).map_err(|e| Error::io(&out_file, e))?;
    }
    command::run(
        cmd_template,
        &[
            ("chunk_dir", &chunk_dir.to_string_lossy()),
            ("seeds_file", &seeds_file.to_string_lossy()),
            ("out_file", &out_file.to_string_lossy()),
        ],
    )
    .map_err(|f| fail(f.to_string()))?;
    let records: Vec<MaskRecord> = read_jsonl(&out_file).map_err(|e| fail(e.to_string()))?;
    let mut out: BTreeMap<u32, BTreeMap<String, Mask>> = BTreeMap::new();
    for r in records {
        let mask = r.mask();
        mask.validate().map_err(|e| fail(format!("frame {} ({}): {e}", r.frame_index, r.identity)))?;
        out.entry(r.frame_index).or_default().insert(r.identity, mask);
    }
    Ok(out)
}

pub struct ExternalTracker {
    pub cmd_template: String,
    pub work_dir: PathBuf,
}

impl ChunkTracker for ExternalTracker {
    fn id(&self) -> &str {
        "external"
    }

    fn track_chunk(&mut self, chunk: &ChunkContext, seeds: &SeedSet) -> Result<Vec<Trajectory>> {
        let dir = chunk.dir.as_ref().ok_or_else(|| Error::ChunkTracking {
            chunk_id: chunk.chunk_id,
            msg: "external tracking needs materialized chunk frames".into(),
        })?;
        let masks = run_external_tracker(&self.cmd_template, chunk.chunk_id, dir, seeds, &self.work_dir)?;
        let mut by_id: BTreeMap<String, Trajectory> = BTreeMap::new();
        for (frame, per_id) in masks {
            for (identity, mask) in per_id {
                // an empty mask means the object is not visible in this frame
                if mask.area() == 0 {
                    continue;
                }
                let bbox = mask.to_bbox()?;
                by_id
                    .entry(identity.clone())
                    .or_insert_with(|| Trajectory::new(identity))
                    .insert(frame, TrackEntry { bbox, mask: Some(mask) });
            }
        }
        Ok(by_id.into_values().collect())
    }
}
