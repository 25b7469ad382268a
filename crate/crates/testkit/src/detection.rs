//! Detection AP recomputed from scratch at every score threshold.

use crate::{rect_iou, Rect};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Det {
    pub score: f64,
    pub rect: Rect,
}

/// Frames as `(ground truth, detections)`.
pub type Scene = Vec<(Vec<Rect>, Vec<Det>)>;

/// True positives and IoUs for one frame: detections by descending score
/// (earlier first on ties) each take the free ground-truth box with the
/// highest IoU at or above `thr`, the lower index on ties.
pub fn greedy(gt: &[Rect], dets: &[Det], thr: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap());
    let mut free = vec![true; gt.len()];
    let mut ious = Vec::new();
    for d in order {
        let mut best: Option<(usize, f64)> = None;
        for g in 0..gt.len() {
            let v = rect_iou(&gt[g], &dets[d].rect);
            if free[g] && v >= thr && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, v)) = best {
            free[g] = false;
            ious.push(v);
        }
    }
    ious
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operating {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub iou_sum: f64,
    pub count_abs_err: f64,
}

/// Keeps detections scoring at least `s` and matches them from scratch.
pub fn at_threshold(scene: &Scene, thr: f64, s: f64) -> Operating {
    let mut op = Operating { tp: 0, fp: 0, fn_: 0, iou_sum: 0.0, count_abs_err: 0.0 };
    for (gt, dets) in scene {
        let kept: Vec<Det> = dets.iter().copied().filter(|d| d.score >= s).collect();
        let ious = greedy(gt, &kept, thr);
        op.tp += ious.len();
        op.fp += kept.len() - ious.len();
        op.fn_ += gt.len() - ious.len();
        op.iou_sum += ious.iter().sum::<f64>();
        op.count_abs_err += (kept.len() as f64 - gt.len() as f64).abs();
    }
    op
}

/// Area under the precision envelope, one point per distinct score.
pub fn average_precision(scene: &Scene, thr: f64) -> f64 {
    let num_gt: usize = scene.iter().map(|(g, _)| g.len()).sum();
    let mut scores: Vec<f64> = scene.iter().flat_map(|(_, d)| d.iter().map(|d| d.score)).collect();
    scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
    scores.dedup();
    let points: Vec<(f64, f64)> = scores
        .iter()
        .map(|&s| {
            let op = at_threshold(scene, thr, s);
            (op.tp as f64 / num_gt as f64, op.tp as f64 / (op.tp + op.fp) as f64)
        })
        .collect();
    let mut ap = 0.0;
    let mut prev = 0.0;
    for k in 0..points.len() {
        let best_precision = points[k..].iter().map(|p| p.1).fold(0.0, f64::max);
        ap += (points[k].0 - prev) * best_precision;
        prev = points[k].0;
    }
    ap
}
