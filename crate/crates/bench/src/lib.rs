//! Seeded inputs shared by the benchmarks.

use herdpipe_core::synth::{make_synthetic_sequence, SynthSequence, SynthSpec};
use herdpipe_core::{BBox, TrackEntry, Trajectory};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform2(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((rows, cols), |_| r.random_range(-1.0..1.0))
}

pub fn uniform3(b: usize, t: usize, d: usize, seed: u64) -> Array3<f64> {
    let mut r = rng(seed);
    Array3::from_shape_fn((b, t, d), |_| r.random_range(-1.0..1.0))
}

pub fn lanes(n_objects: usize, n_frames: u32) -> SynthSequence {
    make_synthetic_sequence(&SynthSpec::lanes(n_objects, n_frames, 50, 1)).expect("valid spec")
}

/// Ground truth with every box jittered by up to `jitter` pixels.
pub fn jittered(gt: &[Trajectory], jitter: f64, seed: u64) -> Vec<Trajectory> {
    let mut r = rng(seed);
    gt.iter()
        .map(|t| {
            let mut p = Trajectory::new(format!("p_{}", t.identity));
            for (&f, e) in &t.entries {
                let b = e.bbox;
                let moved = BBox::new(b.x + r.random_range(-jitter..jitter), b.y + r.random_range(-jitter..jitter), b.w, b.h);
                p.insert(f, TrackEntry::from_bbox(moved));
            }
            p
        })
        .collect()
}
