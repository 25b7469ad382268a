use std::collections::BTreeMap;

use ndarray::Array2;

use super::hungarian::max_weight_matching;
use super::{ChunkContext, ChunkTracker, TrackRun};
use crate::error::Result;
use crate::geometry::{iou_unchecked, BBox};
use crate::model::{SeedSet, TrackEntry, Trajectory};

/// Frame-to-frame IoU association of per-frame boxes (typically filtered
/// detections) onto the seeded identities.
///
/// Each identity is compared against its most recent box. When the best
/// assignment falls below `iou_floor` the identity coasts: it gets no entry
/// for that frame and keeps its last box as reference. Boxes left over after
/// assignment never start new identities.
pub fn naive_iou_tracker(per_frame_boxes: &BTreeMap<u32, Vec<BBox>>, seeds: &SeedSet, iou_floor: f64) -> Result<TrackRun> {
    seeds.validate()?;
    let frames: Vec<u32> = per_frame_boxes.range(seeds.frame..).map(|(&f, _)| f).collect();
    let trajectories = associate(per_frame_boxes, seeds, &frames, iou_floor)?;
    Ok(TrackRun { trajectories, chunk_boundaries: vec![seeds.frame], tracker_id: "naive".into() })
}

fn associate(boxes: &BTreeMap<u32, Vec<BBox>>, seeds: &SeedSet, frames: &[u32], iou_floor: f64) -> Result<Vec<Trajectory>> {
    seeds.validate()?;
    let mut reference: Vec<BBox> = seeds.seeds.iter().map(|s| s.bbox).collect();
    let mut out: Vec<Trajectory> = seeds.seeds.iter().map(|s| Trajectory::new(s.object_name.clone())).collect();
    let empty = Vec::new();
    for &f in frames {
        let current = boxes.get(&f).unwrap_or(&empty);
        if current.is_empty() {
            continue;
        }
        let w = Array2::from_shape_fn((reference.len(), current.len()), |(r, c)| iou_unchecked(&reference[r], &current[c]));
        for (r, c) in max_weight_matching(w.view(), iou_floor)? {
            out[r].insert(f, TrackEntry::from_bbox(current[c]));
            reference[r] = current[c];
        }
    }
    Ok(out)
}

/// [`naive_iou_tracker`] as a chunk tracker over an in-memory box table.
pub struct NaiveIouTracker {
    pub boxes: BTreeMap<u32, Vec<BBox>>,
    pub iou_floor: f64,
}

impl ChunkTracker for NaiveIouTracker {
    fn id(&self) -> &str {
        "naive"
    }

    fn track_chunk(&mut self, chunk: &ChunkContext, seeds: &SeedSet) -> Result<Vec<Trajectory>> {
        associate(&self.boxes, seeds, &chunk.frames, self.iou_floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Provenance, Seed};

    fn seeds(boxes: &[(&str, BBox)]) -> SeedSet {
        SeedSet {
            frame: 1,
            seeds: boxes.iter().map(|(n, b)| Seed { object_name: n.to_string(), bbox: *b, frame: 1 }).collect(),
            provenance: Provenance::AutoFiltered,
        }
    }

    #[test]
    fn translating_box_keeps_identity() {
        let boxes: BTreeMap<u32, Vec<BBox>> = (1..=50).map(|f| (f, vec![BBox::new(f64::from(f), 10.0, 20.0, 20.0)])).collect();
        let run = naive_iou_tracker(&boxes, &seeds(&[("pig_01", BBox::new(1.0, 10.0, 20.0, 20.0))]), 0.3).unwrap();
        assert_eq!(run.trajectories.len(), 1);
        assert_eq!(run.trajectories[0].len(), 50);
    }

    #[test]
    fn teleport_swaps_identities() {
        let left = BBox::new(0.0, 0.0, 10.0, 10.0);
        let right = BBox::new(100.0, 0.0, 10.0, 10.0);
        // Object A is listed first and jumps from left to right at frame 6.
        let boxes: BTreeMap<u32, Vec<BBox>> =
            (1..=10).map(|f| (f, if f < 6 { vec![left, right] } else { vec![right, left] })).collect();
        let run = naive_iou_tracker(&boxes, &seeds(&[("a", left), ("b", right)]), 0.3).unwrap();
        // "a" stays on the left box even though the object there is now B.
        assert!(run.trajectories[0].entries.values().all(|e| e.bbox == left));
        assert!(run.trajectories[1].entries.values().all(|e| e.bbox == right));
    }

    #[test]
    fn low_overlap_coasts() {
        let mut boxes = BTreeMap::new();
        boxes.insert(1, vec![BBox::new(0.0, 0.0, 10.0, 10.0)]);
        boxes.insert(2, vec![BBox::new(9.0, 0.0, 10.0, 10.0)]);
        boxes.insert(3, vec![BBox::new(1.0, 0.0, 10.0, 10.0)]);
        let run = naive_iou_tracker(&boxes, &seeds(&[("a", BBox::new(0.0, 0.0, 10.0, 10.0))]), 0.3).unwrap();
        let frames: Vec<u32> = run.trajectories[0].entries.keys().copied().collect();
        assert_eq!(frames, vec![1, 3]);
    }

    #[test]
    fn empty_seeds_rejected() {
        let s = SeedSet { frame: 1, seeds: vec![], provenance: Provenance::AutoFiltered };
        assert!(naive_iou_tracker(&BTreeMap::new(), &s, 0.3).is_err());
    }
}
