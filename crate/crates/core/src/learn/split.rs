//! Stratified splitting and inverse-frequency class weights.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_RATIOS: [f64; 3] = [0.70, 0.15, 0.15];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn parts(&self) -> [&[usize]; 3] {
        [&self.train, &self.val, &self.test]
    }
}

/// Splits example indices per class by largest remainder. Within a class,
/// remainder ties between parts go to the part furthest below its overall
/// target so far, then to the later part.
pub fn stratified_split(labels: &[usize], ratios: [f64; 3], seed: u64) -> Result<Split> {
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 || ratios.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::InvalidConfig(format!("split ratios {ratios:?} must be non-negative and sum to 1")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    for (&c, idx) in &by_class {
        if idx.len() < 3 {
            return Err(Error::Stratification { class: c.to_string(), count: idx.len() });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split::default();
    let mut assigned = [0usize; 3];
    let mut seen = 0usize;
    for (_, mut idx) in by_class {
        let n = idx.len();
        seen += n;
        let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut order: Vec<usize> = (0..3).collect();
        let deficit = |k: usize| ratios[k] * seen as f64 - assigned[k] as f64;
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.total_cmp(&fa).then(deficit(b).total_cmp(&deficit(a))).then(b.cmp(&a))
        });
        let remaining = n - counts.iter().sum::<usize>();
        for &k in order.iter().take(remaining) {
            counts[k] += 1;
        }
        idx.shuffle(&mut rng);
        let (train, rest) = idx.split_at(counts[0]);
        let (val, test) = rest.split_at(counts[1]);
        split.train.extend_from_slice(train);
        split.val.extend_from_slice(val);
        split.test.extend_from_slice(test);
        for k in 0..3 {
            assigned[k] += counts[k];
        }
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// `w_c = (1/f_c) / Σ_k (1/f_k)` with `f_c` the class frequency.
pub fn class_weights(counts: &[usize]) -> Result<Vec<f64>> {
    if counts.is_empty() {
        return Err(Error::InvalidClass("no classes".into()));
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::InvalidClass(format!("class {c} has no examples")));
    }
    let total: f64 = counts.iter().map(|&n| n as f64).sum();
    let inv: Vec<f64> = counts.iter().map(|&n| total / n as f64).collect();
    let norm: f64 = inv.iter().sum();
    Ok(inv.into_iter().map(|v| v / norm).collect())
}

pub fn class_counts(labels: &[usize], num_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; num_classes];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}
