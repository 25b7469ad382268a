use ndarray::Array2;

use super::hungarian::max_weight_matching;
use super::{ChunkContext, ChunkTracker};
use crate::error::Result;
use crate::geometry::iou_unchecked;
use crate::model::{SeedSet, Trajectory};

/// Replays ground-truth trajectories. Each seed is bound to the ground-truth
/// identity it overlaps best in the seed's own frame (falling back to the
/// chunk's first frame), and inherits that identity's entries for the chunk.
pub struct OracleTracker {
    pub ground_truth: Vec<Trajectory>,
}

impl OracleTracker {
    pub fn new(ground_truth: Vec<Trajectory>) -> Self {
        OracleTracker { ground_truth }
    }

    fn bind(&self, seeds: &SeedSet, fallback_frame: u32) -> Result<Vec<Option<usize>>> {
        let mut bound = vec![None; seeds.seeds.len()];
        let w = Array2::from_shape_fn((seeds.seeds.len(), self.ground_truth.len()), |(r, c)| {
            let s = &seeds.seeds[r];
            let gt = &self.ground_truth[c];
            let entry = gt.entries.get(&s.frame).or_else(|| gt.entries.get(&fallback_frame));
            entry.map_or(0.0, |e| iou_unchecked(&s.bbox, &e.bbox))
        });
        for (r, c) in max_weight_matching(w.view(), f64::MIN_POSITIVE)? {
            bound[r] = Some(c);
        }
        Ok(bound)
    }
}

impl ChunkTracker for OracleTracker {
    fn id(&self) -> &str {
        "oracle"
    }

    fn track_chunk(&mut self, chunk: &ChunkContext, seeds: &SeedSet) -> Result<Vec<Trajectory>> {
        let Some(&first) = chunk.frames.first() else { return Ok(Vec::new()) };
        let bound = self.bind(seeds, first)?;
        let mut out = Vec::new();
        for (seed, gt) in seeds.seeds.iter().zip(bound) {
            let mut t = Trajectory::new(seed.object_name.clone());
            if let Some(gi) = gt {
                let src = &self.ground_truth[gi];
                for f in &chunk.frames {
                    if let Some(e) = src.entries.get(f) {
                        t.insert(*f, e.clone());
                    }
                }
            }
            out.push(t);
        }
        Ok(out)
    }
}
