//! Candidate detections: filtering, tracking seeds and evaluation.

mod eval;

pub use eval::{
    evaluate_detection, group_detections, group_gt, match_frame, DetEvalConfig, DetectionEvaluation, DetectionMeta,
    DetectionReport, FrameMatching,
};

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{Detection, Provenance, Seed, SeedSet};

/// Keeps detections whose label is targeted and whose score reaches `threshold`.
pub fn filter_detections(dets: &[Detection], target_labels: &BTreeSet<String>, threshold: f64) -> Vec<Detection> {
    dets.iter().filter(|d| target_labels.contains(&d.label) && d.score >= threshold).cloned().collect()
}

/// Names filtered detections `<prefix>_01`, `<prefix>_02`, ... by descending
/// score, ties broken by ascending `x` then `y`.
pub fn make_seeds(filtered: &[Detection], naming_prefix: &str) -> Result<SeedSet> {
    let first = filtered.first().ok_or(Error::NoSeeds)?;
    if let Some(d) = filtered.iter().find(|d| d.frame != first.frame) {
        return Err(Error::InvalidInput(format!("seed detections span frames {} and {}", first.frame, d.frame)));
    }
    let mut order: Vec<&Detection> = filtered.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.bbox.x.total_cmp(&b.bbox.x)).then(a.bbox.y.total_cmp(&b.bbox.y)));
    let seeds = order
        .into_iter()
        .enumerate()
        .map(|(i, d)| Seed { object_name: format!("{naming_prefix}_{:02}", i + 1), bbox: d.bbox, frame: d.frame })
        .collect();
    Ok(SeedSet { frame: first.frame, seeds, provenance: Provenance::AutoFiltered })
}
