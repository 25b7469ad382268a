//! Fixed-length sequences over one identity's consecutive labeled frames.

use std::collections::BTreeMap;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::split::{stratified_split, Split};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub identity: String,
    pub frame: u32,
    pub label: usize,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub length: usize,
    pub stride: usize,
    /// A window is kept only when its modal label covers strictly more than
    /// this fraction of its frames.
    pub majority_floor: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { length: 8, stride: 4, majority_floor: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowExample {
    pub identity: String,
    pub start_frame: u32,
    pub sequence: Array2<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowSet {
    pub windows: Vec<WindowExample>,
    pub discarded: usize,
}

/// Runs of consecutive frame indices per identity, in identity order.
fn runs(frames: &[LabeledFrame]) -> Vec<Vec<&LabeledFrame>> {
    let mut by_id: BTreeMap<&str, Vec<&LabeledFrame>> = BTreeMap::new();
    for f in frames {
        by_id.entry(f.identity.as_str()).or_default().push(f);
    }
    let mut out = Vec::new();
    for (_, mut fs) in by_id {
        fs.sort_by_key(|f| f.frame);
        fs.dedup_by_key(|f| f.frame);
        let mut run: Vec<&LabeledFrame> = Vec::new();
        for f in fs {
            if run.last().is_some_and(|p| p.frame + 1 != f.frame) {
                out.push(std::mem::take(&mut run));
            }
            run.push(f);
        }
        if !run.is_empty() {
            out.push(run);
        }
    }
    out
}

/// Modal label, lowest class on ties, and its count.
fn mode(labels: impl Iterator<Item = usize>) -> (usize, usize) {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    counts.into_iter().fold((0, 0), |best, (l, n)| if n > best.1 { (l, n) } else { best })
}

pub fn sliding_windows(frames: &[LabeledFrame], cfg: &WindowConfig) -> WindowSet {
    let mut set = WindowSet::default();
    let t = cfg.length.max(1);
    let s = cfg.stride.max(1);
    for run in runs(frames) {
        let mut start = 0;
        while start + t <= run.len() {
            let w = &run[start..start + t];
            let (label, n) = mode(w.iter().map(|f| f.label));
            if n as f64 / t as f64 > cfg.majority_floor {
                let d = w[0].vector.len();
                let sequence = Array2::from_shape_fn((t, d), |(i, j)| w[i].vector[j]);
                set.windows.push(WindowExample { identity: w[0].identity.clone(), start_frame: w[0].frame, sequence, label });
            } else {
                set.discarded += 1;
            }
            start += s;
        }
    }
    set
}

pub fn stack_windows(windows: &[WindowExample]) -> (Array3<f64>, Vec<usize>) {
    let (t, d) = windows.first().map_or((0, 0), |w| w.sequence.dim());
    let x = Array3::from_shape_fn((windows.len(), t, d), |(b, i, j)| windows[b].sequence[[i, j]]);
    (x, windows.iter().map(|w| w.label).collect())
}

/// Splits frames by whole contiguous blocks so that no window can straddle
/// two parts. Each run is cut into blocks of `block_len` frames, blocks are
/// labeled by their modal frame label and split with [`stratified_split`].
/// Returns frame indices per part.
pub fn block_split(frames: &[LabeledFrame], block_len: usize, ratios: [f64; 3], seed: u64) -> Result<Split> {
    let pos: BTreeMap<(&str, u32), usize> = frames.iter().enumerate().map(|(i, f)| ((f.identity.as_str(), f.frame), i)).collect();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for run in runs(frames) {
        for chunk in run.chunks(block_len.max(1)) {
            blocks.push(chunk.iter().map(|f| pos[&(f.identity.as_str(), f.frame)]).collect());
        }
    }
    let labels: Vec<usize> = blocks.iter().map(|b| mode(b.iter().map(|&i| frames[i].label)).0).collect();
    let split = stratified_split(&labels, ratios, seed)?;
    let expand = |idx: &[usize]| {
        let mut v: Vec<usize> = idx.iter().flat_map(|&b| blocks[b].iter().copied()).collect();
        v.sort_unstable();
        v
    };
    Ok(Split { train: expand(&split.train), val: expand(&split.val), test: expand(&split.test) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(id: &str, labels: &[usize]) -> Vec<LabeledFrame> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| LabeledFrame { identity: id.into(), frame: i as u32 + 1, label: l, vector: vec![i as f64, l as f64] })
            .collect()
    }

    #[test]
    fn window_count_and_labels() {
        let cfg = WindowConfig { length: 4, stride: 2, majority_floor: 0.5 };
        let set = sliding_windows(&frames("pig_01", &[3; 10]), &cfg);
        assert_eq!(set.windows.len(), 4);
        assert_eq!(set.discarded, 0);
        assert!(set.windows.iter().all(|w| w.label == 3));
        assert_eq!(set.windows[1].start_frame, 3);
        assert_eq!(set.windows[1].sequence[[0, 0]], 2.0);
    }

    #[test]
    fn tie_is_discarded() {
        let cfg = WindowConfig { length: 4, stride: 4, majority_floor: 0.5 };
        let set = sliding_windows(&frames("a", &[0, 0, 1, 1]), &cfg);
        assert!(set.windows.is_empty());
        assert_eq!(set.discarded, 1);
        let set = sliding_windows(&frames("a", &[0, 1, 1, 1]), &cfg);
        assert_eq!(set.windows[0].label, 1);
    }

    #[test]
    fn gaps_and_identities_break_runs() {
        let mut fs = frames("a", &[0; 6]);
        fs.remove(3);
        fs.extend(frames("b", &[1; 3]));
        let cfg = WindowConfig { length: 3, stride: 1, majority_floor: 0.5 };
        let set = sliding_windows(&fs, &cfg);
        // runs: a[1..=3], a[5..=6], b[1..=3]
        assert_eq!(set.windows.len(), 2);
        assert_eq!(set.windows[1].identity, "b");
    }

    #[test]
    fn blocks_keep_windows_within_one_part() {
        let mut fs = Vec::new();
        for k in 0..6 {
            fs.extend(frames(&format!("pig_{k:02}"), &[k % 2; 40]));
        }
        let split = block_split(&fs, 10, [0.7, 0.15, 0.15], 4).unwrap();
        let part_of = |i: usize| split.parts().iter().position(|p| p.contains(&i)).unwrap();
        for (b, chunk) in fs.chunks(10).enumerate() {
            let first = part_of(b * 10);
            assert!((0..chunk.len()).all(|k| part_of(b * 10 + k) == first));
        }
        assert_eq!(split.train.len() + split.val.len() + split.test.len(), fs.len());
    }
}
