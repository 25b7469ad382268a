use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use anyhow::{anyhow, bail, Context as _, Result};
use herdpipe_core::crop::{
    crop_batch, default_workers, forward_propagate_labels, parse_crop_filename, plan_crop_tasks, read_crop_manifest,
    write_crop_manifest, BehaviorLabel, CropBatchConfig, CropManifestHeader, CROP_MANIFEST,
};
use herdpipe_core::detect::{evaluate_detection, filter_detections, group_detections, group_gt, make_seeds, DetEvalConfig};
use herdpipe_core::embed::{embed_crops, run_external_embedder, tsne, EmbeddingStore};
use herdpipe_core::ingest::{ingest, IngestConfig, SequenceLayout, Source};
use herdpipe_core::io::{read_detections, read_gt_boxes, read_jsonl, read_seeds, write_json, write_jsonl, write_seeds, GtBox};
use herdpipe_core::learn::{
    block_split, class_counts, class_weights, sliding_windows, stack_windows, stratified_split, train, AnyModel, BiLstm,
    BiLstmConfig, Checkpoint, ClassificationReport, Dataset, EpochStats, LabeledFrame, Mlp, MlpConfig, ModelKind, Split,
    TrainConfig, WindowConfig,
};
use herdpipe_core::overlay::{encode_png, render_overlay, OverlayItem};
use herdpipe_core::synth::{make_synthetic_sequence, SynthSpec};
use herdpipe_core::track::{
    evaluate_mot, render_mot_table, run_chunked, ChunkContext, ChunkTracker, ExternalTracker, NaiveIouTracker, OracleTracker,
    TrackRun,
};
use herdpipe_core::BBox;
use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{EmbedderKind, TrackerKind};
use crate::{Context, EvalSplit, Slot, Stage, StageIo, SEEDS_AUTO};

pub(crate) fn io(ctx: &Context, stage: Stage) -> StageIo {
    let req = |s: Slot| (s, ctx.path(s), true);
    let opt = |s: Slot| (s, ctx.path(s), false);
    let out = |s: Slot| (s, ctx.path(s));
    let reports = ctx.path(Slot::Reports);
    let report = |name: &str| {
        vec![(Slot::Reports, reports.join(format!("{name}.json"))), (Slot::Reports, reports.join(format!("{name}.txt")))]
    };
    match stage {
        Stage::Synth => StageIo { inputs: vec![], outputs: vec![out(Slot::SynthDir)] },
        Stage::Ingest => StageIo { inputs: vec![req(Slot::Source)], outputs: vec![out(Slot::Layout)] },
        Stage::DetectIngest => {
            StageIo { inputs: vec![req(Slot::Candidates), req(Slot::Layout)], outputs: vec![out(Slot::Detections)] }
        }
        Stage::DetectFilter => StageIo {
            inputs: vec![req(Slot::Detections), req(Slot::Layout)],
            outputs: vec![out(Slot::Filtered), (Slot::Seeds, ctx.root().join("detections").join(SEEDS_AUTO))],
        },
        Stage::Track => {
            let mut inputs = vec![req(Slot::Layout), req(Slot::Seeds)];
            match ctx.config.track.tracker {
                TrackerKind::Naive => inputs.push(req(Slot::Filtered)),
                TrackerKind::Oracle => inputs.push(req(Slot::GtTracks)),
                TrackerKind::External => {}
            }
            StageIo { inputs, outputs: vec![out(Slot::Tracks)] }
        }
        Stage::Crop => {
            StageIo { inputs: vec![req(Slot::Layout), req(Slot::Tracks), opt(Slot::Labels)], outputs: vec![out(Slot::Crops)] }
        }
        Stage::Embed => StageIo { inputs: vec![req(Slot::Crops)], outputs: vec![out(Slot::Store)] },
        Stage::Train => StageIo { inputs: vec![req(Slot::Store)], outputs: vec![out(Slot::Model), out(Slot::History)] },
        Stage::EvalDet => StageIo { inputs: vec![req(Slot::GtBoxes), req(Slot::Detections)], outputs: report("detection") },
        Stage::EvalMot => StageIo { inputs: vec![req(Slot::GtTracks), req(Slot::Tracks)], outputs: report("tracking") },
        Stage::EvalCls => StageIo {
            inputs: vec![req(Slot::Model), req(Slot::Store)],
            outputs: report(&format!("classification_{}", split_name(ctx.split))),
        },
        Stage::Tsne => StageIo { inputs: vec![req(Slot::Store)], outputs: vec![out(Slot::Tsne)] },
        Stage::Overlay => StageIo {
            inputs: vec![req(Slot::Layout), opt(Slot::Tracks), opt(Slot::Seeds)],
            outputs: vec![(Slot::Overlays, overlay_path(ctx))],
        },
    }
}

pub(crate) fn exec(ctx: &Context, stage: Stage) -> Result<()> {
    match stage {
        Stage::Synth => synth(ctx),
        Stage::Ingest => ingest_stage(ctx),
        Stage::DetectIngest => detect_ingest(ctx),
        Stage::DetectFilter => detect_filter(ctx),
        Stage::Track => track(ctx),
        Stage::Crop => crop(ctx),
        Stage::Embed => embed(ctx),
        Stage::Train => train_stage(ctx),
        Stage::EvalDet => eval_det(ctx),
        Stage::EvalMot => eval_mot(ctx),
        Stage::EvalCls => eval_cls(ctx),
        Stage::Tsne => tsne_stage(ctx),
        Stage::Overlay => overlay(ctx),
    }
}

fn split_name(s: EvalSplit) -> &'static str {
    match s {
        EvalSplit::Train => "train",
        EvalSplit::Val => "val",
        EvalSplit::Test => "test",
    }
}

fn overlay_path(ctx: &Context) -> std::path::PathBuf {
    ctx.path(Slot::Overlays).join(format!("frame_{:07}.png", ctx.config.overlay.frame))
}

fn parent_dir(path: &Path) -> Result<()> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    Ok(())
}

fn fresh_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).with_context(|| format!("clearing {}", dir.display()))?;
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn synth(ctx: &Context) -> Result<()> {
    let s = &ctx.config.synth;
    let seq = make_synthetic_sequence(&SynthSpec::lanes(s.n_objects, s.n_frames, s.segment, s.seed))?;
    let dir = ctx.path(Slot::SynthDir);
    fresh_dir(&dir.join("frames"))?;
    for f in seq.frame_indices() {
        let path = dir.join("frames").join(format!("{f:07}.png"));
        std::fs::write(&path, encode_png(&seq.render(f))?).with_context(|| path.display().to_string())?;
    }
    let gt = TrackRun { trajectories: seq.trajectories(), chunk_boundaries: vec![1], tracker_id: "ground_truth".into() };
    gt.write(&dir.join("gt_tracks.jsonl"))?;
    write_jsonl(&dir.join("detections.jsonl"), &seq.detections("pig"))?;
    write_jsonl(&dir.join("labels.jsonl"), &seq.sparse_labels())?;
    write_json(&dir.join("spec.json"), &seq.spec)?;
    Ok(())
}

fn ingest_stage(ctx: &Context) -> Result<()> {
    let src = ctx.path(Slot::Source);
    let source =
        if src.is_dir() {
            Source::ImageDir(src)
        } else {
            let decoder_cmd =
                ctx.config.ingest.decoder_cmd.clone().ok_or_else(|| {
                    herdpipe_core::Error::InvalidConfig("ingest.decoder_cmd is required for video sources".into())
                })?;
            Source::Video { path: src, decoder_cmd }
        };
    let cfg = IngestConfig { stride: ctx.config.ingest.stride, max_chunk: ctx.config.ingest.max_chunk };
    let layout = ingest(&source, cfg, &ctx.path(Slot::Layout))?;
    let failed = layout.records.iter().filter(|r| r.error.is_some()).count();
    if layout.records.len() == failed {
        bail!("no frame could be read");
    }
    if failed > 0 {
        log::warn!("{failed} of {} frames could not be read", layout.records.len());
    }
    Ok(())
}

fn readable_frames(layout: &SequenceLayout) -> Vec<u32> {
    layout.records.iter().filter(|r| r.error.is_none()).map(|r| r.global_index).collect()
}

fn detect_ingest(ctx: &Context) -> Result<()> {
    let layout = SequenceLayout::open(&ctx.path(Slot::Layout))?;
    let mut dets = read_detections(&ctx.path(Slot::Candidates))?;
    if let Some(d) = dets.iter().find(|d| layout.record(d.frame).is_none()) {
        bail!("detection at frame {} outside the ingested layout", d.frame);
    }
    dets.sort_by(|a, b| a.frame.cmp(&b.frame).then(b.score.total_cmp(&a.score)));
    let out = ctx.path(Slot::Detections);
    parent_dir(&out)?;
    write_jsonl(&out, &dets)?;
    Ok(())
}

fn detect_filter(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config.detect;
    let layout = SequenceLayout::open(&ctx.path(Slot::Layout))?;
    let dets = read_detections(&ctx.path(Slot::Detections))?;
    let labels: BTreeSet<String> = cfg.labels.iter().cloned().collect();
    let filtered = filter_detections(&dets, &labels, cfg.threshold);
    let out = ctx.path(Slot::Filtered);
    parent_dir(&out)?;
    write_jsonl(&out, &filtered)?;
    let first = *readable_frames(&layout).first().ok_or_else(|| anyhow!("layout has no readable frames"))?;
    let on_first: Vec<_> = filtered.iter().filter(|d| d.frame == first).cloned().collect();
    let mut seeds = make_seeds(&on_first, &cfg.naming_prefix)?;
    let (w, h) = layout.load_frame(first)?.dimensions();
    seeds.clamp_to(f64::from(w), f64::from(h));
    write_seeds(&ctx.root().join("detections").join(SEEDS_AUTO), &seeds)?;
    log::info!("{} of {} detections kept, {} seeds on frame {first}", filtered.len(), dets.len(), seeds.seeds.len());
    Ok(())
}

fn chunks(layout: &SequenceLayout) -> Vec<ChunkContext> {
    layout
        .chunk_ids()
        .into_iter()
        .map(|id| ChunkContext {
            chunk_id: id,
            frames: layout.chunk(id).iter().map(|r| r.global_index).collect(),
            dir: Some(layout.chunk_dir(id)),
        })
        .collect()
}

fn track(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config.track;
    let layout = SequenceLayout::open(&ctx.path(Slot::Layout))?;
    let seeds = read_seeds(&ctx.path(Slot::Seeds))?;
    let mut tracker: Box<dyn ChunkTracker> = match cfg.tracker {
        TrackerKind::Naive => {
            let mut boxes: BTreeMap<u32, Vec<BBox>> = BTreeMap::new();
            for d in read_detections(&ctx.path(Slot::Filtered))? {
                boxes.entry(d.frame).or_default().push(d.bbox);
            }
            Box::new(NaiveIouTracker { boxes, iou_floor: cfg.iou_floor })
        }
        TrackerKind::Oracle => Box::new(OracleTracker::new(TrackRun::read(&ctx.path(Slot::GtTracks))?.trajectories)),
        TrackerKind::External => Box::new(ExternalTracker {
            cmd_template: cfg.cmd.clone().unwrap_or_default(),
            work_dir: ctx.root().join("tracks/work"),
        }),
    };
    let run = run_chunked(tracker.as_mut(), &chunks(&layout), seeds, cfg.chain_window)?;
    let out = ctx.path(Slot::Tracks);
    parent_dir(&out)?;
    run.write(&out)?;
    Ok(())
}

fn crop(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config.crop;
    let layout = SequenceLayout::open(&ctx.path(Slot::Layout))?;
    let run = TrackRun::read(&ctx.path(Slot::Tracks))?;
    let frames: Vec<_> = layout.records.iter().filter(|r| r.error.is_none()).map(|r| r.frame_ref()).collect();
    let labels_path = ctx.path(Slot::Labels);
    let mut labels = HashMap::new();
    if labels_path.exists() {
        let sparse: Vec<BehaviorLabel> = read_jsonl(&labels_path)?;
        let lo = frames.first().map_or(1, |f| f.global_index);
        let hi = frames.last().map_or(0, |f| f.global_index);
        for l in forward_propagate_labels(&sparse, lo..=hi)? {
            labels.insert((l.frame_index, l.identity), l.behavior);
        }
    }
    let tasks = plan_crop_tasks(&run.trajectories, &frames, &labels, cfg.bg.rgb(), (cfg.size, cfg.size));
    let dir = ctx.path(Slot::Crops);
    fresh_dir(&dir)?;
    let batch =
        CropBatchConfig { workers: cfg.workers.unwrap_or_else(default_workers), format: cfg.format, out_dir: dir.clone() };
    let outcome = crop_batch(&tasks, |f| layout.load_frame(f.global_index), &batch)?;
    write_crop_manifest(
        &dir.join(CROP_MANIFEST),
        &CropManifestHeader::new((cfg.size, cfg.size), cfg.bg.rgb(), cfg.format),
        &outcome.records,
    )?;
    if !outcome.failures.is_empty() {
        log::warn!("{} crops failed, see failures.jsonl", outcome.failures.len());
        write_jsonl(&dir.join("failures.jsonl"), &outcome.failures)?;
    }
    if outcome.records.is_empty() {
        bail!("no crops were produced");
    }
    Ok(())
}

fn embed(ctx: &Context) -> Result<()> {
    let crops = ctx.path(Slot::Crops);
    let manifest = crops.join(CROP_MANIFEST);
    let (_, records) = read_crop_manifest(&manifest)?;
    let out = ctx.path(Slot::Store);
    fresh_dir(&out)?;
    let store = match ctx.config.embed.embedder {
        EmbedderKind::Toy => embed_crops(&crops, &records, &out)?,
        EmbedderKind::External => {
            let cmd = ctx.config.embed.cmd.clone().unwrap_or_default();
            run_external_embedder(&cmd, &manifest, &records, &out, ctx.config.embed.dim)?
        }
    };
    log::info!("{} embeddings of dimension {:?}", store.rows.len(), store.dim());
    Ok(())
}

/// Labeled store rows, shaped for one model kind and split like training.
enum Prepared {
    Frames { x: Array2<f64>, y: Vec<usize>, split: Split },
    Windows { parts: [Dataset<Array3<f64>>; 3] },
}

fn labeled_frames(store: &EmbeddingStore, class_names: &[String]) -> Result<Vec<LabeledFrame>> {
    let index: HashMap<&str, usize> = class_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut frames = Vec::new();
    for (row, v) in store.load_all()? {
        let Some(label) = &row.label else { continue };
        let &class = index.get(label.as_str()).ok_or_else(|| anyhow!("label {label:?} unknown to the model"))?;
        let (frame, identity) =
            parse_crop_filename(&row.crop_filename).ok_or_else(|| anyhow!("unparseable crop name {}", row.crop_filename))?;
        frames.push(LabeledFrame { identity, frame, label: class, vector: v.iter().map(|&x| f64::from(x)).collect() });
    }
    if frames.is_empty() {
        bail!("the embedding store has no labeled rows");
    }
    frames.sort_by(|a, b| (&a.identity, a.frame).cmp(&(&b.identity, b.frame)));
    Ok(frames)
}

fn class_names_of(store: &EmbeddingStore) -> Vec<String> {
    let names: BTreeSet<String> = store.rows.iter().filter_map(|r| r.label.clone()).collect();
    names.into_iter().collect()
}

fn prepare(
    frames: &[LabeledFrame],
    kind: ModelKind,
    train_cfg: &TrainConfig,
    window: &WindowConfig,
    block_len: usize,
) -> Result<Prepared> {
    match kind {
        ModelKind::Mlp => {
            let d = frames[0].vector.len();
            let x = Array2::from_shape_fn((frames.len(), d), |(i, j)| frames[i].vector[j]);
            let y: Vec<usize> = frames.iter().map(|f| f.label).collect();
            let split = stratified_split(&y, train_cfg.split, train_cfg.seed)?;
            Ok(Prepared::Frames { x, y, split })
        }
        ModelKind::Bilstm => {
            let split = block_split(frames, block_len, train_cfg.split, train_cfg.seed)?;
            let part = |idx: &[usize]| -> Result<Dataset<Array3<f64>>> {
                let subset: Vec<LabeledFrame> = idx.iter().map(|&i| frames[i].clone()).collect();
                let set = sliding_windows(&subset, window);
                if set.windows.is_empty() {
                    bail!("no window of length {} survives in a split part", window.length);
                }
                let (x, y) = stack_windows(&set.windows);
                Ok(Dataset::new(x, y)?)
            };
            Ok(Prepared::Windows { parts: [part(&split.train)?, part(&split.val)?, part(&split.test)?] })
        }
    }
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    model: ModelKind,
    class_names: &'a [String],
    train_examples: usize,
    val_examples: usize,
    test_examples: usize,
    class_weights: Vec<f64>,
    best_epoch: usize,
    stopped_early: bool,
    history: Vec<EpochStats>,
}

fn train_stage(ctx: &Context) -> Result<()> {
    let learn = &ctx.config.learn;
    let store = EmbeddingStore::open(&ctx.path(Slot::Store))?;
    let class_names = class_names_of(&store);
    let frames = labeled_frames(&store, &class_names)?;
    let c = class_names.len();
    let mut rng = ChaCha8Rng::seed_from_u64(learn.train.seed);
    let d = frames[0].vector.len();
    let (model, weights, outcome_meta, sizes) = match prepare(&frames, learn.model, &learn.train, &learn.window, learn.block_len)?
    {
        Prepared::Frames { x, y, split } => {
            let data = Dataset::new(x, y)?;
            let (tr, va) = (data.subset(&split.train), data.subset(&split.val));
            let weights = class_weights(&class_counts(&tr.labels, c))?;
            let out = train(Mlp::new(d, c, MlpConfig::default(), &mut rng), &tr, &va, &weights, &learn.train)?;
            let sizes = [split.train.len(), split.val.len(), split.test.len()];
            (AnyModel::Mlp(out.model), weights, (out.best_epoch, out.stopped_early, out.history), sizes)
        }
        Prepared::Windows { parts: [tr, va, te] } => {
            let weights = class_weights(&class_counts(&tr.labels, c))?;
            let out = train(BiLstm::new(d, c, BiLstmConfig::default(), &mut rng), &tr, &va, &weights, &learn.train)?;
            let sizes = [tr.len(), va.len(), te.len()];
            (AnyModel::Bilstm(out.model), weights, (out.best_epoch, out.stopped_early, out.history), sizes)
        }
    };
    let path = ctx.path(Slot::Model);
    parent_dir(&path)?;
    let ckpt = Checkpoint { model, class_names: class_names.clone(), train_config: learn.train };
    ckpt.write(&path)?;
    let (best_epoch, stopped_early, history) = outcome_meta;
    log::info!("best epoch {best_epoch} of {}", history.len());
    write_json(
        &ctx.path(Slot::History),
        &TrainSummary {
            model: learn.model,
            class_names: &class_names,
            train_examples: sizes[0],
            val_examples: sizes[1],
            test_examples: sizes[2],
            class_weights: weights,
            best_epoch,
            stopped_early,
            history,
        },
    )?;
    Ok(())
}

fn write_report<T: Serialize>(ctx: &Context, name: &str, value: &T, table: &str) -> Result<()> {
    let dir = ctx.path(Slot::Reports);
    std::fs::create_dir_all(&dir).with_context(|| dir.display().to_string())?;
    write_json(&dir.join(format!("{name}.json")), value)?;
    std::fs::write(dir.join(format!("{name}.txt")), table).with_context(|| format!("writing {name}.txt"))?;
    print!("{table}");
    Ok(())
}

fn read_gt(path: &Path) -> Result<Vec<GtBox>> {
    match TrackRun::read(path) {
        Ok(run) => Ok(run
            .trajectories
            .iter()
            .flat_map(|t| t.entries.iter().map(|(&f, e)| GtBox { frame_index: f, bbox: e.bbox }))
            .collect()),
        Err(_) => Ok(read_gt_boxes(path)?),
    }
}

fn eval_det(ctx: &Context) -> Result<()> {
    let gt = read_gt(&ctx.path(Slot::GtBoxes))?;
    let dets = read_detections(&ctx.path(Slot::Detections))?;
    let cfg = DetEvalConfig { iou_threshold: ctx.config.detect.iou, score_threshold: ctx.config.detect.threshold };
    let eval = evaluate_detection(&group_gt(&gt), &group_detections(&dets), cfg)?;
    write_report(ctx, "detection", &eval, &eval.to_table())
}

fn eval_mot(ctx: &Context) -> Result<()> {
    let gt = TrackRun::read(&ctx.path(Slot::GtTracks))?;
    let pred = TrackRun::read(&ctx.path(Slot::Tracks))?;
    let eval = evaluate_mot(&gt.trajectories, &pred.trajectories, ctx.config.track.iou)?;
    let table = render_mot_table(&[(ctx.sequence_name(), eval.report)]);
    write_report(ctx, "tracking", &eval, &table)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationMeta {
    pub model: ModelKind,
    pub split: String,
    pub examples: usize,
}

#[derive(Serialize)]
struct ClassificationEvaluation<'a> {
    report: &'a ClassificationReport,
    meta: ClassificationMeta,
}

fn eval_cls(ctx: &Context) -> Result<()> {
    let learn = &ctx.config.learn;
    let ckpt = Checkpoint::read(&ctx.path(Slot::Model))?;
    let store = EmbeddingStore::open(&ctx.path(Slot::Store))?;
    let frames = labeled_frames(&store, &ckpt.class_names)?;
    let kind = ckpt.model.kind();
    let pick = |s: &Split| -> Vec<usize> {
        match ctx.split {
            EvalSplit::Train => s.train.clone(),
            EvalSplit::Val => s.val.clone(),
            EvalSplit::Test => s.test.clone(),
        }
    };
    let (truth, predicted) = match prepare(&frames, kind, &ckpt.train_config, &learn.window, learn.block_len)? {
        Prepared::Frames { x, y, split } => {
            let data = Dataset::new(x, y)?.subset(&pick(&split));
            let p = ckpt.predict_frames(&data.inputs)?;
            (data.labels, p)
        }
        Prepared::Windows { parts: [tr, va, te] } => {
            let data = match ctx.split {
                EvalSplit::Train => tr,
                EvalSplit::Val => va,
                EvalSplit::Test => te,
            };
            let p = ckpt.predict_windows(&data.inputs)?;
            (data.labels, p)
        }
    };
    let report = ClassificationReport::from_predictions(&truth, &predicted, &ckpt.class_names)?;
    let meta = ClassificationMeta { model: kind, split: split_name(ctx.split).into(), examples: truth.len() };
    let name = format!("classification_{}", split_name(ctx.split));
    write_report(ctx, &name, &ClassificationEvaluation { report: &report, meta }, &report.to_table())
}

fn tsne_stage(ctx: &Context) -> Result<()> {
    let store = EmbeddingStore::open(&ctx.path(Slot::Store))?;
    let rows = store.load_all()?;
    if rows.is_empty() {
        bail!("the embedding store is empty");
    }
    let d = rows[0].1.len();
    let data = Array2::from_shape_fn((rows.len(), d), |(i, j)| f64::from(rows[i].1[j]));
    let result = tsne(data.view(), &ctx.config.tsne.to_config())?;
    log::info!("t-SNE KL divergence {:.4} -> {:.4}", result.kl_initial, result.kl_final);
    let mut csv = String::from("crop_filename,label,x,y\n");
    for ((row, _), p) in rows.iter().zip(result.points.rows()) {
        csv += &format!("{},{},{},{}\n", row.crop_filename, row.label.as_deref().unwrap_or(""), p[0], p[1]);
    }
    let out = ctx.path(Slot::Tsne);
    parent_dir(&out)?;
    std::fs::write(&out, csv).with_context(|| out.display().to_string())
}

fn overlay(ctx: &Context) -> Result<()> {
    let frame = ctx.config.overlay.frame;
    let layout = SequenceLayout::open(&ctx.path(Slot::Layout))?;
    let tracks = ctx.path(Slot::Tracks);
    let items: Vec<OverlayItem> = if tracks.exists() {
        TrackRun::read(&tracks)?
            .trajectories
            .iter()
            .filter_map(|t| {
                t.entries.get(&frame).map(|e| OverlayItem {
                    identity: t.identity.clone(),
                    bbox: e.bbox,
                    mask: e.mask.clone(),
                    score: None,
                })
            })
            .collect()
    } else {
        read_seeds(&ctx.path(Slot::Seeds))?
            .seeds
            .into_iter()
            .map(|s| OverlayItem { identity: s.object_name, bbox: s.bbox, mask: None, score: None })
            .collect()
    };
    let img = render_overlay(&layout.load_frame(frame)?, &items, ctx.config.overlay.palette_seed)?;
    let out = overlay_path(ctx);
    parent_dir(&out)?;
    std::fs::write(&out, encode_png(&img)?).with_context(|| out.display().to_string())
}
