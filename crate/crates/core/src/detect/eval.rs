use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou_unchecked, BBox};
use crate::io::GtBox;
use crate::model::Detection;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameMatching {
    /// `(gt index, detection index, iou)`
    pub matches: Vec<(usize, usize, f64)>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_dets: Vec<usize>,
}

/// Greedy one-to-one matching: detections in descending score order (input
/// order on ties) each claim the unmatched ground-truth box of highest IoU,
/// provided it reaches `iou_thr`.
pub fn match_frame(gt: &[BBox], dets: &[Detection], iou_thr: f64) -> FrameMatching {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    let mut taken = vec![false; gt.len()];
    let mut out = FrameMatching::default();
    for di in order {
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gt.iter().enumerate() {
            if taken[gi] {
                continue;
            }
            let v = iou_unchecked(g, &dets[di].bbox);
            if v >= iou_thr && best.is_none_or(|(_, b)| v > b) {
                best = Some((gi, v));
            }
        }
        match best {
            Some((gi, v)) => {
                taken[gi] = true;
                out.matches.push((gi, di, v));
            }
            None => out.unmatched_dets.push(di),
        }
    }
    out.unmatched_dets.sort_unstable();
    out.unmatched_gt = taken.iter().enumerate().filter(|(_, &t)| !t).map(|(i, _)| i).collect();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetEvalConfig {
    pub iou_threshold: f64,
    /// Operating point for precision, recall and counting. AP sweeps all scores.
    pub score_threshold: f64,
}

impl Default for DetEvalConfig {
    fn default() -> Self {
        DetEvalConfig { iou_threshold: 0.5, score_threshold: 0.0 }
    }
}

/// Detection quality at one operating point.
///
/// `fpr` is `FP / (TP + FP)`, i.e. one minus precision. This is the quantity
/// commonly reported as "false positive rate" for detectors, which have no
/// countable true negatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionReport {
    pub ap: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub miss_rate: f64,
    pub mean_iou: f64,
    pub count_mae: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionMeta {
    pub iou_threshold: f64,
    pub score_threshold: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub num_frames: usize,
    pub num_gt: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionEvaluation {
    pub report: DetectionReport,
    pub meta: DetectionMeta,
}

pub fn group_gt(boxes: &[GtBox]) -> BTreeMap<u32, Vec<BBox>> {
    let mut out: BTreeMap<u32, Vec<BBox>> = BTreeMap::new();
    for b in boxes {
        out.entry(b.frame_index).or_default().push(b.bbox);
    }
    out
}

pub fn group_detections(dets: &[Detection]) -> BTreeMap<u32, Vec<Detection>> {
    let mut out: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for d in dets {
        out.entry(d.frame).or_default().push(d.clone());
    }
    out
}

/// Pools matches over every frame present in either input.
pub fn evaluate_detection(
    gt_frames: &BTreeMap<u32, Vec<BBox>>,
    det_frames: &BTreeMap<u32, Vec<Detection>>,
    cfg: DetEvalConfig,
) -> Result<DetectionEvaluation> {
    if !(cfg.iou_threshold > 0.0 && cfg.iou_threshold <= 1.0) {
        return Err(Error::InvalidConfig(format!("iou threshold {} outside (0, 1]", cfg.iou_threshold)));
    }
    let num_gt: usize = gt_frames.values().map(Vec::len).sum();
    if num_gt == 0 {
        return Err(Error::UndefinedMetrics("no ground-truth boxes, recall is undefined".into()));
    }
    let frames: BTreeSet<u32> = gt_frames.keys().chain(det_frames.keys()).copied().collect();
    let empty_gt = Vec::new();
    let empty_det = Vec::new();

    // Greedy matching is score-ordered, so matching everything once and then
    // truncating at a threshold equals re-matching the truncated set.
    let mut scored: Vec<(f64, bool)> = Vec::new();
    let (mut tp, mut fp, mut fne) = (0usize, 0usize, 0usize);
    let mut iou_sum = 0.0;
    let mut abs_count_err = 0.0;
    for f in &frames {
        let gt = gt_frames.get(f).unwrap_or(&empty_gt);
        let dets = det_frames.get(f).unwrap_or(&empty_det);
        let m = match_frame(gt, dets, cfg.iou_threshold);
        let mut is_tp = vec![false; dets.len()];
        for &(_, di, _) in &m.matches {
            is_tp[di] = true;
        }
        scored.extend(dets.iter().zip(&is_tp).map(|(d, &t)| (d.score, t)));

        let kept = |di: usize| dets[di].score >= cfg.score_threshold;
        let frame_tp: Vec<f64> = m.matches.iter().filter(|&&(_, di, _)| kept(di)).map(|&(_, _, v)| v).collect();
        let frame_dets = (0..dets.len()).filter(|&di| kept(di)).count();
        tp += frame_tp.len();
        fp += frame_dets - frame_tp.len();
        fne += gt.len() - frame_tp.len();
        iou_sum += frame_tp.iter().sum::<f64>();
        abs_count_err += (frame_dets as f64 - gt.len() as f64).abs();
    }

    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fne);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    let report = DetectionReport {
        ap: average_precision(scored, num_gt),
        precision,
        recall,
        f1,
        tpr: recall,
        fpr: ratio(fp, tp + fp),
        miss_rate: 1.0 - recall,
        mean_iou: if tp == 0 { 0.0 } else { iou_sum / tp as f64 },
        count_mae: abs_count_err / frames.len() as f64,
    };
    let meta = DetectionMeta {
        iou_threshold: cfg.iou_threshold,
        score_threshold: cfg.score_threshold,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fne,
        num_frames: frames.len(),
        num_gt,
    };
    Ok(DetectionEvaluation { report, meta })
}

/// All-points interpolated AP. One precision/recall point per distinct score.
fn average_precision(mut scored: Vec<(f64, bool)>, num_gt: usize) -> f64 {
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points: Vec<(f64, f64)> = Vec::new();
    let (mut tp, mut n) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let s = scored[i].0;
        while i < scored.len() && scored[i].0 == s {
            tp += usize::from(scored[i].1);
            n += 1;
            i += 1;
        }
        points.push((tp as f64 / num_gt as f64, tp as f64 / n as f64));
    }
    let mut envelope: Vec<f64> = points.iter().map(|p| p.1).collect();
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (&(r, _), env) in points.iter().zip(envelope) {
        ap += (r - prev_recall) * env;
        prev_recall = r;
    }
    ap
}

impl DetectionEvaluation {
    /// Two-column table in the layout of the detection results table.
    pub fn to_table(&self) -> String {
        let r = &self.report;
        let pct = |v: f64| format!("{:.2}%", v * 100.0);
        let rows = [
            ("Average Precision (AP)", pct(r.ap)),
            ("Precision", pct(r.precision)),
            ("Recall", pct(r.recall)),
            ("F1 Score", pct(r.f1)),
            ("True Positive Rate", pct(r.tpr)),
            ("False Positive Rate", pct(r.fpr)),
            ("Missed Detection Rate", pct(r.miss_rate)),
            ("Average IoU", format!("{:.3}", r.mean_iou)),
            ("Counting MAE", format!("{:.2}", r.count_mae)),
        ];
        let mut out = format!("{:<24}{}\n", "Metrics", "Value");
        for (k, v) in rows {
            out.push_str(&format!("{k:<24}{v}\n"));
        }
        out.push_str(&format!(
            "(IoU threshold {:.2}, score threshold {:.2})\n",
            self.meta.iou_threshold, self.meta.score_threshold
        ));
        out
    }
}
