//! Seeded random fixtures.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::detection::{Det, Scene};
use crate::mot::Track;
use crate::Rect;

/// Ground-truth tracks moving on a coarse grid plus predictions derived from
/// them with jitter, dropouts, identity swaps, fragments and spurious tracks.
/// Objects are spaced so ties between competing matchings are improbable.
pub fn mot_scenario(seed: u64, max_ids: usize, max_frames: u32) -> (Vec<Track>, Vec<Track>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_ids = rng.random_range(1..=max_ids);
    let n_frames = rng.random_range(2..=max_frames);
    let mut gt: Vec<Track> = Vec::new();
    for _ in 0..n_ids {
        let first = rng.random_range(1..=n_frames);
        let last = rng.random_range(first..=n_frames);
        let mut x = rng.random_range(0.0..200.0);
        let mut y = rng.random_range(0.0..200.0);
        let (vx, vy): (f64, f64) = (rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
        let (w, h) = (rng.random_range(15.0..40.0), rng.random_range(15.0..40.0));
        let mut t = Track::new();
        for f in first..=last {
            if rng.random_bool(0.95) {
                t.insert(f, [x, y, w, h]);
            }
            x += vx;
            y += vy;
        }
        if !t.is_empty() {
            gt.push(t);
        }
    }
    if gt.is_empty() {
        gt.push(BTreeMap::from([(1, [10.0, 10.0, 20.0, 20.0])]));
    }

    let mut pred: Vec<Track> = gt.iter().map(|_| Track::new()).collect();
    let jitter = Normal::new(0.0, 2.5).unwrap();
    for (i, t) in gt.iter().enumerate() {
        for (&f, r) in t {
            if rng.random_bool(0.12) {
                continue;
            }
            let mut q = *r;
            for v in q.iter_mut().take(2) {
                *v += jitter.sample(&mut rng);
            }
            q[2] *= 1.0 + 0.1 * jitter.sample(&mut rng) / 2.5;
            q[3] *= 1.0 + 0.1 * jitter.sample(&mut rng) / 2.5;
            pred[i].insert(f, q);
        }
    }
    // identity swaps from a random frame onward
    for _ in 0..rng.random_range(0..=2) {
        if pred.len() < 2 {
            break;
        }
        let a = rng.random_range(0..pred.len());
        let b = rng.random_range(0..pred.len());
        let from = rng.random_range(1..=n_frames);
        if a != b {
            let tail_a = pred[a].split_off(&from);
            let tail_b = pred[b].split_off(&from);
            pred[a].extend(tail_b);
            pred[b].extend(tail_a);
        }
    }
    // a fragment handed to a fresh identity
    if rng.random_bool(0.5) {
        let a = rng.random_range(0..pred.len());
        let from = rng.random_range(1..=n_frames);
        let tail = pred[a].split_off(&from);
        pred.push(tail);
    }
    // spurious tracks
    for _ in 0..rng.random_range(0..=2) {
        let mut t = Track::new();
        let (x, y) = (rng.random_range(0.0..250.0), rng.random_range(0.0..250.0));
        for f in 1..=n_frames {
            if rng.random_bool(0.4) {
                t.insert(f, [x + rng.random_range(-3.0..3.0), y, 20.0, 20.0]);
            }
        }
        pred.push(t);
    }
    pred.retain(|t| !t.is_empty());
    (gt, pred)
}

/// Random multi-frame detection scene with near-duplicates, misses and
/// background detections; scores on a coarse grid so ties occur.
pub fn detection_scene(seed: u64, max_frames: usize) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_frames = rng.random_range(1..=max_frames);
    let mut scene = Scene::new();
    for _ in 0..n_frames {
        let n_gt = rng.random_range(0..6);
        let gt: Vec<Rect> = (0..n_gt)
            .map(|_| {
                [
                    rng.random_range(0.0..300.0),
                    rng.random_range(0.0..300.0),
                    rng.random_range(10.0..60.0),
                    rng.random_range(10.0..60.0),
                ]
            })
            .collect();
        let mut dets = Vec::new();
        for g in &gt {
            for _ in 0..rng.random_range(0..=2) {
                let s = rng.random_range(0.3..8.0);
                dets.push(Det {
                    score: (rng.random_range(0..20) as f64) / 20.0,
                    rect: [
                        g[0] + rng.random_range(-s..s),
                        g[1] + rng.random_range(-s..s),
                        g[2],
                        g[3] * rng.random_range(0.8..1.2),
                    ],
                });
            }
        }
        for _ in 0..rng.random_range(0..3) {
            dets.push(Det {
                score: (rng.random_range(0..20) as f64) / 20.0,
                rect: [rng.random_range(0.0..300.0), rng.random_range(0.0..300.0), 20.0, 20.0],
            });
        }
        scene.push((gt, dets));
    }
    if scene.iter().all(|(g, _)| g.is_empty()) {
        scene[0].0.push([5.0, 5.0, 20.0, 20.0]);
    }
    scene
}

/// Sequences of `t` frame vectors of dimension `d`. Each sequence draws a
/// multiset of vectors and orders it by the first component, ascending for
/// class 0 and descending for class 1, so single frames carry no class
/// information. Classes alternate.
pub fn order_only_sequences(n: usize, t: usize, d: usize, seed: u64) -> (Vec<Vec<Vec<f64>>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut seqs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let mut frames: Vec<Vec<f64>> = (0..t).map(|_| (0..d).map(|_| normal.sample(&mut rng)).collect()).collect();
        frames.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        let label = k % 2;
        if label == 1 {
            frames.reverse();
        }
        seqs.push(frames);
        labels.push(label);
    }
    (seqs, labels)
}
