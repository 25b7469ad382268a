//! CLEAR-MOT and identity (IDF1) metrics.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::hungarian::{hungarian, max_weight_matching};
use crate::error::{Error, Result};
use crate::geometry::{iou_unchecked, BBox};
use crate::model::Trajectory;

pub const MOSTLY_TRACKED: f64 = 0.8;
pub const MOSTLY_LOST: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotReport {
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub recall: f64,
    pub precision: f64,
    pub mota: f64,
    pub num_switches: usize,
    pub fragmentations: usize,
    pub mostly_tracked: usize,
    pub partially_tracked: usize,
    pub mostly_lost: usize,
    pub num_tracklets: usize,
    pub avg_tracklet_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotMeta {
    pub iou_threshold: f64,
    pub num_frames: usize,
    pub num_gt_ids: usize,
    pub num_pred_ids: usize,
    pub num_gt_dets: usize,
    pub num_pred_dets: usize,
    pub matches: usize,
    pub false_positives: usize,
    pub misses: usize,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotEvaluation {
    pub report: MotReport,
    pub meta: MotMeta,
}

#[derive(Default)]
struct FrameObjects {
    gt: Vec<(usize, BBox)>,
    pred: Vec<(usize, BBox)>,
}

fn collect_frames(gt: &[Trajectory], pred: &[Trajectory]) -> BTreeMap<u32, FrameObjects> {
    let mut frames: BTreeMap<u32, FrameObjects> = BTreeMap::new();
    for (i, t) in gt.iter().enumerate() {
        for (&f, e) in &t.entries {
            frames.entry(f).or_default().gt.push((i, e.bbox));
        }
    }
    for (j, t) in pred.iter().enumerate() {
        for (&f, e) in &t.entries {
            frames.entry(f).or_default().pred.push((j, e.bbox));
        }
    }
    frames
}

/// Scores `pred` against `gt`; both cover the same frame range.
pub fn evaluate_mot(gt: &[Trajectory], pred: &[Trajectory], iou_thr: f64) -> Result<MotEvaluation> {
    if !(iou_thr > 0.0 && iou_thr <= 1.0) {
        return Err(Error::InvalidConfig(format!("iou threshold {iou_thr} outside (0, 1]")));
    }
    let num_gt_dets: usize = gt.iter().map(Trajectory::len).sum();
    if num_gt_dets == 0 {
        return Err(Error::UndefinedMetrics("ground truth has no entries".into()));
    }
    let num_pred_dets: usize = pred.iter().map(Trajectory::len).sum();
    let frames = collect_frames(gt, pred);

    // CLEAR-MOT pass
    let mut last_match: Vec<Option<usize>> = vec![None; gt.len()];
    let mut matched_flags: Vec<Vec<bool>> = vec![Vec::new(); gt.len()];
    let (mut matches, mut fp, mut misses, mut switches) = (0usize, 0usize, 0usize, 0usize);
    for objs in frames.values() {
        let mut gt_done = vec![false; objs.gt.len()];
        let mut pred_done = vec![false; objs.pred.len()];
        let pred_slot: BTreeMap<usize, usize> = objs.pred.iter().enumerate().map(|(k, &(j, _))| (j, k)).collect();
        for (gk, &(gi, gbox)) in objs.gt.iter().enumerate() {
            let Some(pj) = last_match[gi] else { continue };
            let Some(&pk) = pred_slot.get(&pj) else { continue };
            if !pred_done[pk] && iou_unchecked(&gbox, &objs.pred[pk].1) >= iou_thr {
                gt_done[gk] = true;
                pred_done[pk] = true;
                matches += 1;
            }
        }
        let open_gt: Vec<usize> = (0..objs.gt.len()).filter(|&k| !gt_done[k]).collect();
        let open_pred: Vec<usize> = (0..objs.pred.len()).filter(|&k| !pred_done[k]).collect();
        if !open_gt.is_empty() && !open_pred.is_empty() {
            let w = Array2::from_shape_fn((open_gt.len(), open_pred.len()), |(r, c)| {
                iou_unchecked(&objs.gt[open_gt[r]].1, &objs.pred[open_pred[c]].1)
            });
            for (r, c) in max_weight_matching(w.view(), iou_thr)? {
                let (gk, pk) = (open_gt[r], open_pred[c]);
                let (gi, pj) = (objs.gt[gk].0, objs.pred[pk].0);
                if last_match[gi].is_some_and(|prev| prev != pj) {
                    switches += 1;
                }
                last_match[gi] = Some(pj);
                gt_done[gk] = true;
                pred_done[pk] = true;
                matches += 1;
            }
        }
        for (gk, &(gi, _)) in objs.gt.iter().enumerate() {
            matched_flags[gi].push(gt_done[gk]);
        }
        misses += gt_done.iter().filter(|&&d| !d).count();
        fp += pred_done.iter().filter(|&&d| !d).count();
    }

    let mut fragmentations = 0;
    let (mut mt, mut pt, mut ml) = (0, 0, 0);
    for flags in matched_flags.iter().filter(|f| !f.is_empty()) {
        fragmentations += count_fragmentations(flags);
        let ratio = flags.iter().filter(|&&m| m).count() as f64 / flags.len() as f64;
        if ratio >= MOSTLY_TRACKED {
            mt += 1;
        } else if ratio < MOSTLY_LOST {
            ml += 1;
        } else {
            pt += 1;
        }
    }

    // identity pass
    let mut overlap = Array2::<f64>::zeros((gt.len(), pred.len()));
    for objs in frames.values() {
        for &(gi, g) in &objs.gt {
            for &(pj, p) in &objs.pred {
                if iou_unchecked(&g, &p) >= iou_thr {
                    overlap[[gi, pj]] += 1.0;
                }
            }
        }
    }
    let idtp = hungarian(overlap.mapv(|v| -v).view())?.pairs.iter().map(|&(r, c)| overlap[[r, c]]).sum::<f64>() as usize;
    let idfp = num_pred_dets - idtp;
    let idfn = num_gt_dets - idtp;

    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (num_tracklets, tracklet_frames) = tracklets(pred);
    let report = MotReport {
        idf1: ratio(2 * idtp, 2 * idtp + idfp + idfn),
        idp: ratio(idtp, idtp + idfp),
        idr: ratio(idtp, idtp + idfn),
        recall: ratio(matches, num_gt_dets),
        precision: ratio(matches, matches + fp),
        mota: 1.0 - (misses + fp + switches) as f64 / num_gt_dets as f64,
        num_switches: switches,
        fragmentations,
        mostly_tracked: mt,
        partially_tracked: pt,
        mostly_lost: ml,
        num_tracklets,
        avg_tracklet_length: ratio(tracklet_frames, num_tracklets),
    };
    let meta = MotMeta {
        iou_threshold: iou_thr,
        num_frames: frames.len(),
        num_gt_ids: gt.iter().filter(|t| !t.is_empty()).count(),
        num_pred_ids: pred.iter().filter(|t| !t.is_empty()).count(),
        num_gt_dets,
        num_pred_dets,
        matches,
        false_positives: fp,
        misses,
        idtp,
        idfp,
        idfn,
    };
    Ok(MotEvaluation { report, meta })
}

/// Number of matched -> unmatched -> matched interruptions.
fn count_fragmentations(flags: &[bool]) -> usize {
    let Some(first) = flags.iter().position(|&m| m) else { return 0 };
    let last = flags.iter().rposition(|&m| m).expect("has a match");
    flags[first..=last].windows(2).filter(|w| !w[0] && w[1]).count()
}

/// Runs of consecutive frame indices across all predicted identities.
fn tracklets(pred: &[Trajectory]) -> (usize, usize) {
    let mut count = 0;
    let mut frames = 0;
    for t in pred {
        let mut prev: Option<u32> = None;
        for &f in t.entries.keys() {
            if prev.is_none_or(|p| f != p + 1) {
                count += 1;
            }
            prev = Some(f);
            frames += 1;
        }
    }
    (count, frames)
}

/// Per-sequence table with an "Average" row, in the multi-object tracking
/// results layout.
pub fn render_mot_table(rows: &[(String, MotReport)]) -> String {
    let header = [
        "Validation Sequences",
        "Idf1",
        "Recall",
        "Precision",
        "Mostly Lost",
        "Num Switches",
        "Mota",
        "Avg. Tracklet Length",
        "Num Tracklets",
    ];
    let pct = |v: f64| format!("{:.2}%", v * 100.0);
    let num = |v: f64| {
        if (v - v.round()).abs() < 1e-9 {
            format!("{:.0}", v.round())
        } else {
            format!("{v:.2}")
        }
    };
    let cells = |name: &str, r: [f64; 8]| -> Vec<String> {
        vec![name.to_string(), pct(r[0]), pct(r[1]), pct(r[2]), num(r[3]), num(r[4]), pct(r[5]), num(r[6]), num(r[7])]
    };
    let values = |r: &MotReport| {
        [
            r.idf1,
            r.recall,
            r.precision,
            r.mostly_lost as f64,
            r.num_switches as f64,
            r.mota,
            r.avg_tracklet_length,
            r.num_tracklets as f64,
        ]
    };
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for (name, r) in rows {
        table.push(cells(name, values(r)));
    }
    if !rows.is_empty() {
        let mut mean = [0.0; 8];
        for (_, r) in rows {
            for (m, v) in mean.iter_mut().zip(values(r)) {
                *m += v;
            }
        }
        table.push(cells("Average", mean.map(|m| m / rows.len() as f64)));
    }
    render_aligned(&table)
}

pub(crate) fn render_aligned(table: &[Vec<String>]) -> String {
    let cols = table.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| table.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in table {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
