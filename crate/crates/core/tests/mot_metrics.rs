use std::collections::BTreeMap;

use herdpipe_core::track::{evaluate_mot, hungarian, max_weight_matching};
use herdpipe_core::{BBox, TrackEntry, Trajectory};
use herdpipe_testkit::mot::{clear_mot, max_assignment_exhaustive, overlap_counts, Track};
use herdpipe_testkit::scenario::mot_scenario;
use ndarray::Array2;
use proptest::prelude::*;

fn to_trajectories(tracks: &[Track], prefix: &str) -> Vec<Trajectory> {
    tracks
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let mut traj = Trajectory::new(format!("{prefix}_{k:02}"));
            for (&f, r) in t {
                traj.insert(f, TrackEntry::from_bbox(BBox::new(r[0], r[1], r[2], r[3])));
            }
            traj
        })
        .collect()
}

#[test]
fn matches_brute_force_on_random_scenarios() {
    let (mut switches, mut frags, mut fps, mut idf1_below_one) = (0, 0, 0, 0);
    for seed in 0..200 {
        let (gt, pred) = mot_scenario(seed, 8, 50);
        let oracle = clear_mot(&gt, &pred, 0.5);
        let got = evaluate_mot(&to_trajectories(&gt, "gt"), &to_trajectories(&pred, "p"), 0.5).unwrap();
        let r = got.report;
        assert_eq!(got.meta.matches, oracle.matches, "seed {seed}");
        assert_eq!(got.meta.false_positives, oracle.false_positives, "seed {seed}");
        assert_eq!(got.meta.misses, oracle.misses, "seed {seed}");
        assert_eq!(r.num_switches, oracle.switches, "seed {seed}");
        assert_eq!(r.fragmentations, oracle.fragmentations, "seed {seed}");
        assert_eq!(
            (r.mostly_tracked, r.partially_tracked, r.mostly_lost),
            (oracle.mostly_tracked, oracle.partially_tracked, oracle.mostly_lost),
            "seed {seed}"
        );
        assert!((r.mota - oracle.mota()).abs() <= 1e-12, "seed {seed}");
        assert!((r.idf1 - oracle.idf1()).abs() <= 1e-12, "seed {seed}");
        if gt.len() <= 6 && pred.len() <= 8 {
            let exhaustive = max_assignment_exhaustive(&overlap_counts(&gt, &pred, 0.5));
            assert_eq!(got.meta.idtp, exhaustive, "seed {seed}");
        }
        switches += oracle.switches;
        frags += oracle.fragmentations;
        fps += oracle.false_positives;
        idf1_below_one += usize::from(oracle.idf1() < 1.0);
    }
    assert!(switches > 20 && frags > 20 && fps > 100 && idf1_below_one > 100, "{switches} {frags} {fps} {idf1_below_one}");
}

fn constant(id: &str, frames: std::ops::RangeInclusive<u32>, b: BBox) -> Trajectory {
    let mut t = Trajectory::new(id);
    for f in frames {
        t.insert(f, TrackEntry::from_bbox(b));
    }
    t
}

#[test]
fn mid_sequence_swap() {
    let a = BBox::new(0.0, 0.0, 10.0, 10.0);
    let b = BBox::new(50.0, 0.0, 10.0, 10.0);
    let gt = vec![constant("g1", 1..=10, a), constant("g2", 1..=10, b)];
    let mut p1 = constant("p1", 1..=5, a);
    let mut p2 = constant("p2", 1..=5, b);
    for f in 6..=10 {
        p1.insert(f, TrackEntry::from_bbox(b));
        p2.insert(f, TrackEntry::from_bbox(a));
    }
    let r = evaluate_mot(&gt, &[p1, p2], 0.5).unwrap().report;
    assert_eq!(r.mota, 0.9);
    assert_eq!(r.idf1, 0.5);
    assert_eq!(r.num_switches, 2);
}

#[test]
fn idf1_ignores_identity_order() {
    for seed in 0..30 {
        let (gt, pred) = mot_scenario(seed, 6, 30);
        let g = to_trajectories(&gt, "gt");
        let p = to_trajectories(&pred, "p");
        let base = evaluate_mot(&g, &p, 0.5).unwrap().report;
        let mut g_rev = g.clone();
        g_rev.reverse();
        let mut p_rev = p.clone();
        p_rev.rotate_left(p.len() / 2);
        let permuted = evaluate_mot(&g_rev, &p_rev, 0.5).unwrap().report;
        assert!((base.idf1 - permuted.idf1).abs() < 1e-12, "seed {seed}");
    }
}

#[test]
fn spurious_track_lowers_mota_and_adds_false_positives() {
    for seed in 0..30 {
        let (gt, mut pred) = mot_scenario(seed, 5, 30);
        let g = to_trajectories(&gt, "gt");
        let before = evaluate_mot(&g, &to_trajectories(&pred, "p"), 0.5).unwrap();
        // far from every ground-truth box
        pred.push((1..=3).map(|f| (f, [5000.0, 5000.0, 10.0, 10.0])).collect::<BTreeMap<_, _>>());
        let after = evaluate_mot(&g, &to_trajectories(&pred, "p"), 0.5).unwrap();
        assert_eq!(after.meta.false_positives, before.meta.false_positives + 3);
        assert!(after.report.mota < before.report.mota);
    }
}

#[test]
fn empty_ground_truth_is_undefined() {
    let p = vec![constant("p", 1..=3, BBox::new(0.0, 0.0, 5.0, 5.0))];
    assert!(evaluate_mot(&[], &p, 0.5).is_err());
}

fn brute_min_cost(c: &Array2<f64>) -> f64 {
    let (r, k) = c.dim();
    fn go(c: &Array2<f64>, i: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if i == c.nrows() {
            *best = best.min(acc);
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                go(c, i + 1, used, acc + c[[i, j]], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    if r <= k {
        go(c, 0, &mut vec![false; k], 0.0, &mut best);
    } else {
        go(&c.t().to_owned(), 0, &mut vec![false; r], 0.0, &mut best);
    }
    best
}

proptest! {
    #[test]
    fn hungarian_is_optimal(rows in 1usize..6, cols in 1usize..6, vals in prop::collection::vec(-50.0f64..50.0, 36)) {
        let c = Array2::from_shape_fn((rows, cols), |(i, j)| vals[i * 6 + j]);
        let a = hungarian(c.view()).unwrap();
        prop_assert_eq!(a.pairs.len(), rows.min(cols));
        prop_assert!((a.total_cost - brute_min_cost(&c)).abs() < 1e-9);
    }

    #[test]
    fn matching_prefers_cardinality(vals in prop::collection::vec(0.0f64..1.0, 16)) {
        let w = Array2::from_shape_fn((4, 4), |(i, j)| vals[i * 4 + j]);
        let pairs = max_weight_matching(w.view(), 0.5).unwrap();
        prop_assert!(pairs.iter().all(|&(i, j)| w[[i, j]] >= 0.5));
        // cardinality of a maximum matching on the admissible graph
        let mut best = 0;
        for perm in permutations(4) {
            best = best.max((0..4).filter(|&i| w[[i, perm[i]]] >= 0.5).count());
        }
        prop_assert_eq!(pairs.len(), best);
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}
