//! Acceptance checks, one PASS/FAIL line each. Pass a substring to run a
//! subset, e.g. `cargo test --test acceptance -- temporal`.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use anyhow::{bail, ensure, Context as _, Result};
use herdpipe_cli::{run_pipeline, Context, PipelineConfig, Stage};
use herdpipe_core::detect::{evaluate_detection, DetEvalConfig, DetectionEvaluation, DetectionMeta, DetectionReport};
use herdpipe_core::embed::{decode_embedding, encode_embedding, read_embedding, tsne, write_embedding, TsneConfig};
use herdpipe_core::ingest::IngestPlan;
use herdpipe_core::io::{read_seeds, write_seeds};
use herdpipe_core::learn::{
    adam_step, class_counts, class_weights, clip_loss, evaluate_classifier, stratified_split, train, weighted_cross_entropy,
    AdamConfig, AdamState, AnyModel, BiLstm, BiLstmConfig, Checkpoint, ClassMetrics, ClassificationReport, Classifier, Dataset,
    Dropout, Mlp, MlpConfig, TrainConfig, WeightedAverage, DEFAULT_RATIOS,
};
use herdpipe_core::synth::{make_synthetic_sequence, SynthSpec};
use herdpipe_core::track::{
    evaluate_mot, render_mot_table, run_chunked, ChunkContext, MotEvaluation, MotMeta, MotReport, OracleTracker,
};
use herdpipe_core::{BBox, BinaryGrid, Mask, Provenance, Seed, SeedSet, TrackEntry, Trajectory};
use herdpipe_testkit::detection::{at_threshold, average_precision, Det, Scene};
use herdpipe_testkit::gradient::{central_differences, max_relative_error};
use herdpipe_testkit::mot::{clear_mot, max_assignment_exhaustive, overlap_counts, Track};
use herdpipe_testkit::scenario::{detection_scene, mot_scenario, order_only_sequences};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Check = fn() -> Result<String>;

const CHECKS: &[(&str, u64, Check)] = &[
    ("mot_oracle_equivalence", 30, mot_oracle_equivalence),
    ("mot_swap_fixture", 60, mot_swap_fixture),
    ("detection_ap_oracle", 60, detection_ap_oracle),
    ("gradient_checks", 60, gradient_checks),
    ("temporal_benefit", 300, temporal_benefit),
    ("chunk_chaining_equivalence", 120, chunk_chaining_equivalence),
    ("end_to_end_synthetic", 600, end_to_end_synthetic),
    ("arithmetic_fixtures", 60, arithmetic_fixtures),
    ("format_round_trips", 60, format_round_trips),
    ("tsne_fixtures", 120, tsne_fixtures),
    ("report_schemas", 60, report_schemas),
];

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for &(name, budget, check) in CHECKS {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let result = match outcome {
            Ok(Ok(detail)) if elapsed <= Duration::from_secs(budget) => Ok(detail),
            Ok(Ok(detail)) => Err(format!("{detail}; took longer than {budget} s")),
            Ok(Err(e)) => Err(format!("{e:#}")),
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let secs = elapsed.as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name} ({detail}; {secs:.1} s)"),
            Err(e) => {
                failed += 1;
                println!("FAIL {name} ({e}; {secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---- tracking metrics ----

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

fn mot_oracle_equivalence() -> Result<String> {
    let mut exhaustive = 0;
    for seed in 0..200 {
        let (gt, pred) = mot_scenario(seed, 8, 50);
        let oracle = clear_mot(&gt, &pred, 0.5);
        let got = evaluate_mot(&to_trajectories(&gt, "gt"), &to_trajectories(&pred, "p"), 0.5)?;
        let r = got.report;
        ensure!(close(r.mota, oracle.mota(), 1e-12), "seed {seed}: MOTA {} vs {}", r.mota, oracle.mota());
        ensure!(close(r.idf1, oracle.idf1(), 1e-12), "seed {seed}: IDF1 {} vs {}", r.idf1, oracle.idf1());
        ensure!(r.num_switches == oracle.switches, "seed {seed}: switches {} vs {}", r.num_switches, oracle.switches);
        ensure!(r.fragmentations == oracle.fragmentations, "seed {seed}: fragmentations");
        if gt.len() <= 6 {
            let best = max_assignment_exhaustive(&overlap_counts(&gt, &pred, 0.5));
            ensure!(got.meta.idtp == best, "seed {seed}: IDTP {} vs exhaustive {best}", got.meta.idtp);
            exhaustive += 1;
        }
    }
    Ok(format!("200 scenarios, {exhaustive} with exhaustive pairing"))
}

fn constant(id: &str, frames: std::ops::RangeInclusive<u32>, b: BBox) -> Trajectory {
    let mut t = Trajectory::new(id);
    for f in frames {
        t.insert(f, TrackEntry::from_bbox(b));
    }
    t
}

fn mot_swap_fixture() -> Result<String> {
    let a = BBox::new(0.0, 0.0, 10.0, 10.0);
    let b = BBox::new(50.0, 0.0, 10.0, 10.0);
    let gt = vec![constant("g1", 1..=10, a), constant("g2", 1..=10, b)];
    let mut p1 = constant("p1", 1..=5, a);
    let mut p2 = constant("p2", 1..=5, b);
    for f in 6..=10 {
        p1.insert(f, TrackEntry::from_bbox(b));
        p2.insert(f, TrackEntry::from_bbox(a));
    }
    let r = evaluate_mot(&gt, &[p1, p2], 0.5)?.report;
    ensure!(r.mota == 0.9 && r.idf1 == 0.5, "MOTA {} IDF1 {}", r.mota, r.idf1);
    Ok(format!("MOTA {} IDF1 {}", r.mota, r.idf1))
}

// ---- detection metrics ----

type CoreScene = (BTreeMap<u32, Vec<BBox>>, BTreeMap<u32, Vec<herdpipe_core::Detection>>);

fn to_core(scene: &Scene) -> CoreScene {
    let mut gt = BTreeMap::new();
    let mut dets = BTreeMap::new();
    for (k, (g, d)) in scene.iter().enumerate() {
        let f = k as u32 + 1;
        gt.insert(f, g.iter().map(|r| BBox::new(r[0], r[1], r[2], r[3])).collect());
        let ds = d
            .iter()
            .map(|d| herdpipe_core::Detection::new(f, "pig", d.score, BBox::new(d.rect[0], d.rect[1], d.rect[2], d.rect[3])));
        dets.insert(f, ds.collect());
    }
    (gt, dets)
}

fn detection_ap_oracle() -> Result<String> {
    for seed in 0..100 {
        let scene = detection_scene(seed, 12);
        let (gt, dets) = to_core(&scene);
        let cfg = DetEvalConfig { iou_threshold: 0.5, score_threshold: 0.35 };
        let got = evaluate_detection(&gt, &dets, cfg)?;
        let ap = average_precision(&scene, 0.5);
        ensure!(close(got.report.ap, ap, 1e-12), "seed {seed}: AP {} vs {ap}", got.report.ap);
        let op = at_threshold(&scene, 0.5, 0.35);
        ensure!(
            (got.meta.true_positives, got.meta.false_positives, got.meta.false_negatives) == (op.tp, op.fp, op.fn_),
            "seed {seed}: counts differ"
        );
        ensure!(close(got.report.count_mae, op.count_abs_err / scene.len() as f64, 1e-12), "seed {seed}: MAE");
    }
    let scene = detection_scene(7, 10);
    let perfect: Scene =
        scene.iter().map(|(g, _)| (g.clone(), g.iter().map(|&rect| Det { score: 0.9, rect }).collect())).collect();
    let (g, d) = to_core(&perfect);
    let r = evaluate_detection(&g, &d, DetEvalConfig::default())?.report;
    ensure!(r.ap == 1.0 && r.count_mae == 0.0, "perfect input gave AP {} MAE {}", r.ap, r.count_mae);
    Ok("100 scenes; perfect AP 1, MAE 0".into())
}

// ---- gradients ----

const H: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-6;

fn normal2(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Array2<f64> {
    let n = Normal::new(0.0, scale).unwrap();
    Array2::from_shape_fn((r, c), |_| n.sample(rng))
}

fn targets_weights(rng: &mut ChaCha8Rng, b: usize, c: usize) -> (Vec<usize>, Vec<f64>) {
    let t = (0..b).map(|_| rng.random_range(0..c)).collect();
    let w = (0..c).map(|_| rng.random_range(0.1..1.0)).collect();
    (t, w)
}

fn model_error<M: Classifier>(
    model: &M,
    x: &M::Input,
    targets: &[usize],
    weights: &[f64],
    rng: &mut ChaCha8Rng,
    rebuild: impl Fn(Vec<f64>) -> M,
) -> Result<f64> {
    let (_, cache) = model.forward(x, Dropout::Sample(rng))?;
    let masks = M::dropout_masks(&cache);
    let (logits, cache) = model.forward(x, Dropout::Fixed(&masks))?;
    let (_, dlogits) = weighted_cross_entropy(logits.view(), targets, weights)?;
    let analytic = model.backward(&cache, &dlogits);
    let coords: Vec<usize> = (0..analytic.len()).collect();
    let loss = |p: &[f64]| {
        let (l, _) = rebuild(p.to_vec()).forward(x, Dropout::Fixed(&masks)).unwrap();
        weighted_cross_entropy(l.view(), targets, weights).unwrap().0
    };
    Ok(max_relative_error(&analytic, &central_differences(loss, model.params(), &coords, H), FLOOR))
}

fn gradient_checks() -> Result<String> {
    let mut worst = [0.0f64; 4];
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b, c) = (rng.random_range(1..9), rng.random_range(2..10));
        let logits = normal2(&mut rng, b, c, 2.0);
        let (t, w) = targets_weights(&mut rng, b, c);
        let (_, grad) = weighted_cross_entropy(logits.view(), &t, &w)?;
        let x: Vec<f64> = logits.iter().copied().collect();
        let coords: Vec<usize> = (0..x.len()).collect();
        let f = |p: &[f64]| {
            let l = Array2::from_shape_vec((b, c), p.to_vec()).unwrap();
            weighted_cross_entropy(l.view(), &t, &w).unwrap().0
        };
        let analytic: Vec<f64> = grad.iter().copied().collect();
        worst[0] = worst[0].max(max_relative_error(&analytic, &central_differences(f, &x, &coords, H), FLOOR));

        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (b, d, c) = (rng.random_range(1..7), rng.random_range(1..9), rng.random_range(2..6));
        let cfg = MlpConfig { hidden: [rng.random_range(2..12), rng.random_range(2..10)], dropout: 0.5 };
        let model = Mlp::new(d, c, cfg, &mut rng);
        let x = normal2(&mut rng, b, d, 1.0);
        let (t, w) = targets_weights(&mut rng, b, c);
        let err = model_error(&model, &x, &t, &w, &mut rng, |p| Mlp::from_params(d, c, cfg, p).unwrap())?;
        worst[1] = worst[1].max(err);

        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let (b, len, d, c) = (rng.random_range(1..4), rng.random_range(1..7), rng.random_range(1..9), rng.random_range(2..5));
        let cfg = BiLstmConfig { hidden: rng.random_range(1..6), head: rng.random_range(1..6), dropout: 0.3 };
        let model = BiLstm::new(d, c, cfg, &mut rng);
        let n = Normal::new(0.0, 1.0).unwrap();
        let x = Array3::from_shape_fn((b, len, d), |_| n.sample(&mut rng));
        let (t, w) = targets_weights(&mut rng, b, c);
        let err = model_error(&model, &x, &t, &w, &mut rng, |p| BiLstm::from_params(d, c, cfg, p).unwrap())?;
        worst[2] = worst[2].max(err);

        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let (n, d) = (rng.random_range(1..7), rng.random_range(2..9));
        let tau = rng.random_range(0.5..10.0);
        let images = normal2(&mut rng, n, d, 1.0);
        let texts = normal2(&mut rng, n, d, 1.0);
        let r = clip_loss(images.view(), texts.view(), tau)?;
        let x: Vec<f64> = images.iter().chain(texts.iter()).copied().collect();
        let coords: Vec<usize> = (0..x.len()).collect();
        let f = |p: &[f64]| {
            let i = Array2::from_shape_vec((n, d), p[..n * d].to_vec()).unwrap();
            let t = Array2::from_shape_vec((n, d), p[n * d..].to_vec()).unwrap();
            clip_loss(i.view(), t.view(), tau).unwrap().loss
        };
        let analytic: Vec<f64> = r.grad_images.iter().chain(r.grad_texts.iter()).copied().collect();
        worst[3] = worst[3].max(max_relative_error(&analytic, &central_differences(f, &x, &coords, H), FLOOR));
    }
    let detail =
        format!("max rel. error CE {:.1e}, MLP {:.1e}, BiLSTM {:.1e}, CLIP {:.1e}", worst[0], worst[1], worst[2], worst[3]);
    ensure!(worst.iter().all(|&e| e <= GRAD_TOL), "{detail}");
    Ok(detail)
}

// ---- temporal benefit ----

fn frame_dataset(seqs: &[Vec<Vec<f64>>], labels: &[usize], idx: &[usize]) -> Result<Dataset<Array2<f64>>> {
    let d = seqs[0][0].len();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for &i in idx {
        for f in &seqs[i] {
            rows.extend_from_slice(f);
            y.push(labels[i]);
        }
    }
    Ok(Dataset::new(Array2::from_shape_vec((y.len(), d), rows)?, y)?)
}

fn window_dataset(seqs: &[Vec<Vec<f64>>], labels: &[usize], idx: &[usize]) -> Result<Dataset<Array3<f64>>> {
    let (t, d) = (seqs[0].len(), seqs[0][0].len());
    let flat: Vec<f64> = idx.iter().flat_map(|&i| seqs[i].iter().flatten().copied()).collect();
    Ok(Dataset::new(Array3::from_shape_vec((idx.len(), t, d), flat)?, idx.iter().map(|&i| labels[i]).collect())?)
}

fn temporal_benefit() -> Result<String> {
    let (seqs, labels) = order_only_sequences(600, 8, 16, 3);
    let split = stratified_split(&labels, DEFAULT_RATIOS, 0)?;
    let names = vec!["ascending".to_string(), "descending".to_string()];
    let cfg = TrainConfig::default();
    let weights = class_weights(&class_counts(&split.train.iter().map(|&i| labels[i]).collect::<Vec<_>>(), 2))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let [tr, va, te] = split.parts().map(|p| frame_dataset(&seqs, &labels, p));
    let mlp = train(Mlp::new(16, 2, MlpConfig::default(), &mut rng), &tr?, &va?, &weights, &cfg)?;
    let mlp_acc = evaluate_classifier(&mlp.model, &te?, &names)?.accuracy;

    let [tr, va, te] = split.parts().map(|p| window_dataset(&seqs, &labels, p));
    let lstm = train(BiLstm::new(16, 2, BiLstmConfig::default(), &mut rng), &tr?, &va?, &weights, &cfg)?;
    let lstm_acc = evaluate_classifier(&lstm.model, &te?, &names)?.accuracy;

    let detail = format!("frame-level MLP {mlp_acc:.3}, BiLSTM {lstm_acc:.3}");
    ensure!((0.40..=0.60).contains(&mlp_acc) && lstm_acc >= 0.95, "{detail}");
    Ok(detail)
}

// ---- chunking ----

fn chunk_chaining_equivalence() -> Result<String> {
    let seq = make_synthetic_sequence(&SynthSpec::lanes(4, 7000, 120, 5))?;
    let gt = seq.trajectories();
    let seeds = SeedSet {
        frame: 1,
        seeds: gt.iter().map(|t| Seed { object_name: t.identity.clone(), bbox: t.entries[&1].bbox, frame: 1 }).collect(),
        provenance: Provenance::AutoFiltered,
    };
    let plan = IngestPlan::new(7000, 1, 3000)?;
    let mut by_chunk: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for (fr, _) in plan.frames() {
        by_chunk.entry(fr.chunk_id).or_default().push(fr.global_index);
    }
    let chunked: Vec<ChunkContext> =
        by_chunk.into_iter().map(|(chunk_id, frames)| ChunkContext { chunk_id, frames, dir: None }).collect();
    let sizes: Vec<usize> = chunked.iter().map(|c| c.frames.len()).collect();
    ensure!(sizes == [3000, 3000, 1000], "chunk sizes {sizes:?}");
    let whole = vec![ChunkContext { chunk_id: 0, frames: (1..=7000).collect(), dir: None }];
    let a = run_chunked(&mut OracleTracker::new(gt.clone()), &chunked, seeds.clone(), 1)?;
    let b = run_chunked(&mut OracleTracker::new(gt.clone()), &whole, seeds, 1)?;
    ensure!(a.trajectories == b.trajectories, "chunked trajectories differ from the unchunked run");
    ensure!(a.trajectories == gt, "trajectories differ from ground truth");
    Ok(format!("chunks {sizes:?}, boundaries {:?}", a.chunk_boundaries))
}

// ---- pipeline ----

fn end_to_end_synthetic() -> Result<String> {
    let tmp = tempfile::tempdir()?;
    let toml = "[paths]\nroot = 'run'\n\
                [synth]\nn_objects = 4\nn_frames = 600\nsegment = 50\n\
                [track]\ntracker = 'naive'\n\
                [embed]\nembedder = 'toy'\n\
                [learn]\nmodel = 'mlp'\n";
    let mut cfg = PipelineConfig::from_toml(toml)?;
    cfg.resolve(tmp.path());
    let ctx = Context::new(cfg);
    let stages = [
        Stage::Synth,
        Stage::Ingest,
        Stage::DetectIngest,
        Stage::DetectFilter,
        Stage::Track,
        Stage::Crop,
        Stage::Embed,
        Stage::Train,
        Stage::EvalMot,
        Stage::EvalCls,
    ];
    run_pipeline(&ctx, &stages, false)?;
    let reports = tmp.path().join("run/reports");
    let mot: serde_json::Value = serde_json::from_slice(&std::fs::read(reports.join("tracking.json"))?)?;
    let cls: serde_json::Value = serde_json::from_slice(&std::fs::read(reports.join("classification_test.json"))?)?;
    let idf1 = mot["report"]["idf1"].as_f64().context("idf1 missing")?;
    let acc = cls["report"]["accuracy"].as_f64().context("accuracy missing")?;
    let detail = format!("IDF1 {idf1}, test accuracy {acc:.3}");
    ensure!(idf1 == 1.0 && acc >= 0.90, "{detail}");
    Ok(detail)
}

// ---- fixtures ----

fn arithmetic_fixtures() -> Result<String> {
    ensure!(class_weights(&[1, 1, 2])? == vec![0.4, 0.4, 0.2], "class weights");
    let mut theta = [1.0];
    adam_step(&mut theta, &[2.0], &mut AdamState::new(1), &AdamConfig { weight_decay: 0.0, ..AdamConfig::default() })?;
    ensure!(close(theta[0], 0.999, 1e-10), "Adam step gave {}", theta[0]);
    let counts = [3168, 3187, 5475, 638, 327, 15256, 90, 126, 431];
    let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
    ensure!(labels.len() == 28_698);
    let test = stratified_split(&labels, DEFAULT_RATIOS, 0)?.test.len();
    ensure!(test.abs_diff(4305) <= 1, "test support {test}");
    let eye = ndarray::array![[1.0, 0.0], [0.0, 1.0]];
    let loss = clip_loss(eye.view(), eye.view(), 1.0)?.loss;
    ensure!(close(loss, 0.3133, 1e-4), "CLIP loss {loss}");
    Ok(format!("test support {test}, CLIP loss {loss:.4}"))
}

fn format_round_trips() -> Result<String> {
    let dir = tempfile::tempdir()?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for dim in [1usize, 7, 1024] {
        let v: Vec<f32> = (0..dim).map(|_| rng.random::<f32>() * 200.0 - 100.0).collect();
        let back = decode_embedding(&encode_embedding(&v)?)?;
        let path = dir.path().join(format!("{dim}.emb"));
        write_embedding(&path, &v)?;
        let read = read_embedding(&path)?;
        let same = |w: &[f32]| w.len() == v.len() && v.iter().zip(w).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure!(same(&back) && same(&read), "embedding of dim {dim} changed");
    }
    for _ in 0..200 {
        let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
        let density: f64 = rng.random();
        let grid = BinaryGrid::from_fn(w, h, |_, _| rng.random_bool(density));
        ensure!(Mask::encode(&grid)?.decode()? == grid, "RLE changed a {w}x{h} raster");
    }
    let names: Vec<String> = ["resting", "walking", "running"].map(String::from).to_vec();
    for model in [
        AnyModel::Mlp(Mlp::new(64, 3, MlpConfig::default(), &mut rng)),
        AnyModel::Bilstm(BiLstm::new(16, 3, BiLstmConfig::default(), &mut rng)),
    ] {
        let ck = Checkpoint { model, class_names: names.clone(), train_config: TrainConfig::default() };
        let path = dir.path().join("model.ckpt");
        ck.write(&path)?;
        let back = Checkpoint::read(&path)?;
        let bits = ck.model.params().iter().zip(back.model.params()).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure!(bits && back == ck, "checkpoint changed");
    }
    let set = SeedSet {
        frame: 1,
        seeds: (1..=8)
            .map(|k| Seed { object_name: format!("pig_{k:02}"), bbox: BBox::new(10.25 * k as f64, 3.5, 20.0, 17.75), frame: 1 })
            .collect(),
        provenance: Provenance::HumanReviewed,
    };
    let path = dir.path().join("seeds.jsonl");
    write_seeds(&path, &set)?;
    ensure!(read_seeds(&path)? == set, "seeds changed");
    Ok("embeddings, RLE masks, checkpoints, seeds".into())
}

fn tsne_fixtures() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let data = Array2::from_shape_fn((100, 10), |(i, _)| noise.sample(&mut rng) + if i < 50 { 0.0 } else { 8.0 });
    let cfg = TsneConfig { perplexity: 15.0, ..TsneConfig::default() };
    let r = tsne(data.view(), &cfg)?;
    ensure!(r.kl_final < r.kl_initial, "KL rose from {} to {}", r.kl_initial, r.kl_final);
    let p = &r.points;
    let centroid = |rows: std::ops::Range<usize>| {
        let k = rows.len() as f64;
        let (sx, sy) = rows.fold((0.0, 0.0), |(a, b), i| (a + p[[i, 0]], b + p[[i, 1]]));
        (sx / k, sy / k)
    };
    let (ca, cb) = (centroid(0..50), centroid(50..100));
    let d2 = |i: usize, c: (f64, f64)| (p[[i, 0]] - c.0).powi(2) + (p[[i, 1]] - c.1).powi(2);
    let purity = (0..100).filter(|&i| (d2(i, ca) < d2(i, cb)) == (i < 50)).count() as f64 / 100.0;
    ensure!(purity >= 0.95, "purity {purity}");
    ensure!(tsne(data.view(), &cfg)?.points == r.points, "not reproducible");

    let tri = ndarray::array![[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
    let t = tsne(tri.view(), &TsneConfig { perplexity: 2.0, ..TsneConfig::default() })?;
    ensure!(t.kl_final < t.kl_initial, "KL rose on the triangle fixture");
    Ok(format!("KL {:.3} -> {:.3}, purity {purity}", r.kl_initial, r.kl_final))
}

// ---- report schemas ----

fn keys(v: &serde_json::Value) -> Vec<String> {
    v.as_object().map(|o| o.keys().cloned().collect()).unwrap_or_default()
}

fn sorted(names: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    v.sort();
    v
}

fn rejects_extra_field<T: serde::de::DeserializeOwned>(mut v: serde_json::Value) -> bool {
    v.as_object_mut().unwrap().insert("extra".into(), serde_json::Value::Null);
    serde_json::from_value::<T>(v).is_err()
}

fn mot_row(idf1: f64, switches: usize, mota: f64) -> MotReport {
    MotReport {
        idf1,
        idp: idf1,
        idr: idf1,
        recall: idf1,
        precision: idf1,
        mota,
        num_switches: switches,
        fragmentations: 0,
        mostly_tracked: 8,
        partially_tracked: 0,
        mostly_lost: 0,
        num_tracklets: 8,
        avg_tracklet_length: 600.0,
    }
}

fn class_row(name: &str, p: f64, r: f64, f1: f64, support: u64) -> ClassMetrics {
    ClassMetrics { name: name.into(), precision: p, recall: r, f1, support, absent: false }
}

fn report_schemas() -> Result<String> {
    let det = DetectionEvaluation {
        report: DetectionReport {
            ap: 0.8928,
            precision: 0.8019,
            recall: 0.8805,
            f1: 0.8394,
            tpr: 0.8805,
            fpr: 0.1981,
            miss_rate: 0.1195,
            mean_iou: 0.747,
            count_mae: 1.53,
        },
        meta: DetectionMeta {
            iou_threshold: 0.5,
            score_threshold: 0.3,
            true_positives: 0,
            false_positives: 0,
            false_negatives: 0,
            num_frames: 0,
            num_gt: 0,
        },
    };
    let v = serde_json::to_value(det)?;
    ensure!(
        keys(&v["report"]) == sorted(&["ap", "precision", "recall", "f1", "tpr", "fpr", "miss_rate", "mean_iou", "count_mae"]),
        "detection fields {:?}",
        keys(&v["report"])
    );
    ensure!(serde_json::from_value::<DetectionEvaluation>(v.clone())? == det);
    ensure!(rejects_extra_field::<DetectionReport>(v["report"].clone()), "detection schema accepts unknown fields");
    let table = det.to_table();
    for line in [
        "Metrics                 Value",
        "Average Precision (AP)  89.28%",
        "Precision               80.19%",
        "Recall                  88.05%",
        "F1 Score                83.94%",
        "True Positive Rate      88.05%",
        "False Positive Rate     19.81%",
        "Missed Detection Rate   11.95%",
        "Average IoU             0.747",
    ] {
        ensure!(table.lines().any(|l| l == line), "detection table lacks {line:?}:\n{table}");
    }

    let rows: Vec<(String, MotReport)> = [
        ("2019_11_05_000002", 0.910, 0, 0.820),
        ("2019_11_11_000028", 0.874, 2, 0.748),
        ("2019_11_11_000036", 0.916, 0, 0.832),
        ("2019_11_22_000010", 0.864, 0, 0.728),
        ("2019_11_28_000113", 0.983, 0, 0.966),
        ("2019_12_02_000005", 0.945, 0, 0.891),
        ("2019_12_02_000208", 0.981, 0, 0.962),
        ("2019_12_10_000060", 0.999, 0, 0.998),
        ("2019_12_10_000078", 0.928, 2, 0.856),
    ]
    .into_iter()
    .map(|(n, i, s, m)| (n.to_string(), mot_row(i, s, m)))
    .collect();
    let mot = MotEvaluation {
        report: rows[0].1,
        meta: MotMeta {
            iou_threshold: 0.5,
            num_frames: 600,
            num_gt_ids: 8,
            num_pred_ids: 8,
            num_gt_dets: 0,
            num_pred_dets: 0,
            matches: 0,
            false_positives: 0,
            misses: 0,
            idtp: 0,
            idfp: 0,
            idfn: 0,
        },
    };
    let v = serde_json::to_value(mot)?;
    let table2 = ["idf1", "recall", "precision", "mostly_lost", "num_switches", "mota", "avg_tracklet_length", "num_tracklets"];
    let fields = keys(&v["report"]);
    ensure!(table2.iter().all(|c| fields.contains(&c.to_string())), "tracking fields {fields:?}");
    ensure!(serde_json::from_value::<MotEvaluation>(v.clone())? == mot);
    ensure!(rejects_extra_field::<MotReport>(v["report"].clone()), "tracking schema accepts unknown fields");
    let table = render_mot_table(&rows);
    let lines: Vec<&str> = table.lines().collect();
    ensure!(lines.len() == 11, "tracking table has {} lines", lines.len());
    let cols = |l: &str| l.split("  ").filter(|c| !c.is_empty()).map(str::trim).map(String::from).collect::<Vec<_>>();
    ensure!(
        cols(lines[0])
            == [
                "Validation Sequences",
                "Idf1",
                "Recall",
                "Precision",
                "Mostly Lost",
                "Num Switches",
                "Mota",
                "Avg. Tracklet Length",
                "Num Tracklets"
            ],
        "tracking header {:?}",
        cols(lines[0])
    );
    ensure!(
        cols(lines[8]) == ["2019_12_10_000060", "99.90%", "99.90%", "99.90%", "0", "0", "99.80%", "600", "8"],
        "tracking row {:?}",
        cols(lines[8])
    );
    ensure!(
        cols(lines[10]) == ["Average", "93.33%", "93.33%", "93.33%", "0", "0.44", "86.68%", "600", "8"],
        "average row {:?}",
        cols(lines[10])
    );
    ensure!(lines.iter().all(|l| l.len() == lines[0].len()), "tracking columns are not aligned:\n{table}");

    let mlp_rows = [
        class_row("Standing", 0.892, 0.762, 0.821, 475),
        class_row("Lying", 0.816, 0.962, 0.883, 478),
        class_row("Eating", 0.965, 0.996, 0.980, 821),
        class_row("Drinking", 0.860, 0.896, 0.878, 96),
        class_row("Sitting", 0.662, 0.878, 0.754, 49),
        class_row("Sleeping", 0.992, 0.937, 0.964, 2289),
        class_row("Running", 0.473, 0.643, 0.546, 14),
        class_row("Playing with toy", 0.900, 0.947, 0.923, 19),
        class_row("Nose-to-nose", 0.492, 0.938, 0.645, 64),
    ];
    let lstm_rows = [
        class_row("Standing", 0.907, 0.784, 0.841, 236),
        class_row("Lying", 0.901, 0.958, 0.929, 238),
        class_row("Eating", 0.985, 0.958, 0.972, 409),
        class_row("Drinking", 0.793, 0.958, 0.868, 48),
        class_row("Sitting", 0.594, 0.760, 0.667, 25),
        class_row("Sleeping", 0.983, 0.973, 0.978, 1136),
        class_row("Running", 0.400, 0.571, 0.471, 7),
        class_row("Playing with toy", 0.818, 1.000, 0.900, 9),
        class_row("Nose-to-nose", 0.517, 0.903, 0.700, 31),
    ];
    for (rows, avg, acc) in [
        (mlp_rows.to_vec(), WeightedAverage { precision: 0.940, recall: 0.929, f1: 0.932, support: 4305 }, 0.929),
        (lstm_rows.to_vec(), WeightedAverage { precision: 0.949, recall: 0.943, f1: 0.944, support: 2139 }, 0.942),
    ] {
        let support: u64 = rows.iter().map(|r| r.support).sum();
        ensure!(support == avg.support, "class supports sum to {support}, not {}", avg.support);
        let report = ClassificationReport { classes: rows, weighted_average: avg, accuracy: acc, confusion: vec![] };
        let v = serde_json::to_value(&report)?;
        ensure!(keys(&v["classes"][0]) == sorted(&["name", "precision", "recall", "f1", "support", "absent"]));
        ensure!(keys(&v["weighted_average"]) == sorted(&["precision", "recall", "f1", "support"]));
        ensure!(serde_json::from_value::<ClassificationReport>(v.clone())? == report);
        ensure!(rejects_extra_field::<ClassificationReport>(v), "classification schema accepts unknown fields");
        let table = report.to_table();
        let lines: Vec<&str> = table.lines().collect();
        ensure!(lines[0] == "Behavior\tPrecision\tRecall\tF1-Score\tSupport");
        ensure!(lines[1..=10].iter().all(|l| l.split('\t').count() == 5), "classification rows are not 5 columns");
        ensure!(lines[10].starts_with("Weighted Average\t"), "{}", lines[10]);
    }
    let eating = ClassificationReport {
        classes: mlp_rows.to_vec(),
        weighted_average: WeightedAverage { precision: 0.94, recall: 0.929, f1: 0.932, support: 4305 },
        accuracy: 0.929,
        confusion: vec![],
    }
    .to_table();
    if !eating.contains("Eating\t0.965\t0.996\t0.980\t821\n") || !eating.contains("Weighted Average\t0.940\t0.929\t0.932\t4305\n")
    {
        bail!("classification table rows differ:\n{eating}");
    }
    Ok("detection, tracking and classification schemas and tables".into())
}
