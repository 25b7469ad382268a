//! CLEAR-MOT and IDF1 by exhaustive search.

use std::collections::{BTreeMap, BTreeSet};

use crate::{rect_iou, Rect};

pub type Track = BTreeMap<u32, Rect>;

#[derive(Debug, Clone, PartialEq)]
pub struct MotCounts {
    pub matches: usize,
    pub false_positives: usize,
    pub misses: usize,
    pub switches: usize,
    pub fragmentations: usize,
    pub mostly_tracked: usize,
    pub partially_tracked: usize,
    pub mostly_lost: usize,
    pub idtp: usize,
    pub num_gt: usize,
    pub num_pred: usize,
}

impl MotCounts {
    pub fn mota(&self) -> f64 {
        1.0 - (self.misses + self.false_positives + self.switches) as f64 / self.num_gt as f64
    }

    pub fn idf1(&self) -> f64 {
        let denom = self.num_gt + self.num_pred;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.idtp as f64 / denom as f64
        }
    }
}

/// Best matching among `pairs` (gt, pred, iou): most pairs first, then the
/// largest IoU sum. Found by enumerating every matching of each connected
/// component of the admissibility graph.
fn best_matching(pairs: &[(usize, usize, f64)]) -> Vec<(usize, usize)> {
    let mut remaining: Vec<(usize, usize, f64)> = pairs.to_vec();
    let mut out = Vec::new();
    while let Some(&(g0, _, _)) = remaining.first() {
        let mut gs: BTreeSet<usize> = BTreeSet::from([g0]);
        let mut ps: BTreeSet<usize> = BTreeSet::new();
        loop {
            let before = gs.len() + ps.len();
            for &(g, p, _) in &remaining {
                if gs.contains(&g) || ps.contains(&p) {
                    gs.insert(g);
                    ps.insert(p);
                }
            }
            if gs.len() + ps.len() == before {
                break;
            }
        }
        let (comp, rest): (Vec<_>, Vec<_>) = remaining.into_iter().partition(|(g, _, _)| gs.contains(g));
        remaining = rest;
        let gts: Vec<usize> = gs.into_iter().collect();
        let mut best: (usize, f64, Vec<(usize, usize)>) = (0, f64::NEG_INFINITY, Vec::new());
        let mut current = Vec::new();
        enumerate(&gts, 0, &comp, &mut BTreeSet::new(), &mut current, 0.0, &mut best);
        out.extend(best.2);
    }
    out
}

fn enumerate(
    gts: &[usize],
    k: usize,
    pairs: &[(usize, usize, f64)],
    used: &mut BTreeSet<usize>,
    current: &mut Vec<(usize, usize)>,
    weight: f64,
    best: &mut (usize, f64, Vec<(usize, usize)>),
) {
    if k == gts.len() {
        if current.len() > best.0 || (current.len() == best.0 && weight > best.1) {
            *best = (current.len(), weight, current.clone());
        }
        return;
    }
    enumerate(gts, k + 1, pairs, used, current, weight, best);
    for &(g, p, v) in pairs.iter().filter(|(g, _, _)| *g == gts[k]) {
        if used.insert(p) {
            current.push((g, p));
            enumerate(gts, k + 1, pairs, used, current, weight + v, best);
            current.pop();
            used.remove(&p);
        }
    }
}

/// Per frame: each ground-truth object (in index order) keeps its previous
/// partner if that partner is present, unclaimed and overlaps enough; the
/// rest are matched by [`best_matching`].
pub fn clear_mot(gt: &[Track], pred: &[Track], thr: f64) -> MotCounts {
    let frames: BTreeSet<u32> = gt.iter().chain(pred).flat_map(|t| t.keys().copied()).collect();
    let mut last: Vec<Option<usize>> = vec![None; gt.len()];
    let mut history: Vec<Vec<bool>> = vec![Vec::new(); gt.len()];
    let mut c = MotCounts {
        matches: 0,
        false_positives: 0,
        misses: 0,
        switches: 0,
        fragmentations: 0,
        mostly_tracked: 0,
        partially_tracked: 0,
        mostly_lost: 0,
        idtp: 0,
        num_gt: gt.iter().map(|t| t.len()).sum(),
        num_pred: pred.iter().map(|t| t.len()).sum(),
    };
    for f in frames {
        let present_gt: Vec<usize> = (0..gt.len()).filter(|&i| gt[i].contains_key(&f)).collect();
        let present_pred: Vec<usize> = (0..pred.len()).filter(|&j| pred[j].contains_key(&f)).collect();
        let mut matched_gt = BTreeSet::new();
        let mut matched_pred = BTreeSet::new();
        for &i in &present_gt {
            if let Some(j) = last[i] {
                if present_pred.contains(&j) && !matched_pred.contains(&j) && rect_iou(&gt[i][&f], &pred[j][&f]) >= thr {
                    matched_gt.insert(i);
                    matched_pred.insert(j);
                }
            }
        }
        let mut pairs = Vec::new();
        for &i in present_gt.iter().filter(|i| !matched_gt.contains(i)) {
            for &j in present_pred.iter().filter(|j| !matched_pred.contains(j)) {
                let v = rect_iou(&gt[i][&f], &pred[j][&f]);
                if v >= thr {
                    pairs.push((i, j, v));
                }
            }
        }
        for (i, j) in best_matching(&pairs) {
            if last[i].is_some_and(|p| p != j) {
                c.switches += 1;
            }
            last[i] = Some(j);
            matched_gt.insert(i);
            matched_pred.insert(j);
        }
        c.matches += matched_gt.len();
        c.misses += present_gt.len() - matched_gt.len();
        c.false_positives += present_pred.len() - matched_pred.len();
        for &i in &present_gt {
            history[i].push(matched_gt.contains(&i));
        }
    }
    for h in history.iter().filter(|h| !h.is_empty()) {
        // count every unmatched stretch that has a match on both sides
        let mut seen_match = false;
        let mut gap = false;
        for &m in h {
            if m {
                if seen_match && gap {
                    c.fragmentations += 1;
                }
                seen_match = true;
                gap = false;
            } else if seen_match {
                gap = true;
            }
        }
        let ratio = h.iter().filter(|&&m| m).count() as f64 / h.len() as f64;
        if ratio >= 0.8 {
            c.mostly_tracked += 1;
        } else if ratio < 0.2 {
            c.mostly_lost += 1;
        } else {
            c.partially_tracked += 1;
        }
    }
    let overlap = overlap_counts(gt, pred, thr);
    c.idtp = max_assignment_dp(&overlap);
    c
}

/// `overlap[i][j]` = frames where gt `i` and prediction `j` overlap by `thr`.
pub fn overlap_counts(gt: &[Track], pred: &[Track], thr: f64) -> Vec<Vec<usize>> {
    gt.iter()
        .map(|g| pred.iter().map(|p| g.iter().filter(|(f, r)| p.get(f).is_some_and(|q| rect_iou(r, q) >= thr)).count()).collect())
        .collect()
}

/// Maximum-weight one-to-one pairing by dynamic programming over subsets of
/// predictions.
pub fn max_assignment_dp(w: &[Vec<usize>]) -> usize {
    let cols = w.first().map_or(0, Vec::len);
    assert!(cols <= 20, "too many columns for the subset DP");
    let mut dp = vec![0usize; 1 << cols];
    for row in w {
        let mut next = dp.clone();
        for mask in 0..(1usize << cols) {
            for (j, &v) in row.iter().enumerate() {
                if mask & (1 << j) == 0 {
                    let m2 = mask | (1 << j);
                    next[m2] = next[m2].max(dp[mask] + v);
                }
            }
        }
        dp = next;
    }
    dp.into_iter().max().unwrap_or(0)
}

/// Maximum-weight pairing by trying every injective map from the smaller
/// side into the larger, leaving entries unpaired where it helps.
pub fn max_assignment_exhaustive(w: &[Vec<usize>]) -> usize {
    let rows = w.len();
    let cols = w.first().map_or(0, Vec::len);
    fn go(w: &[Vec<usize>], i: usize, used: &mut Vec<bool>, acc: usize, best: &mut usize) {
        if i == w.len() {
            *best = (*best).max(acc);
            return;
        }
        go(w, i + 1, used, acc, best);
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                go(w, i + 1, used, acc + w[i][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = 0;
    if rows <= cols {
        go(w, 0, &mut vec![false; cols], 0, &mut best);
    } else {
        let t: Vec<Vec<usize>> = (0..cols).map(|j| (0..rows).map(|i| w[i][j]).collect()).collect();
        go(&t, 0, &mut vec![false; rows], 0, &mut best);
    }
    best
}
