//! Per-instance crops: mask isolation, background fill, bilinear resize, and
//! the forward propagation of sparse behavior annotations.

use std::collections::{BTreeMap, HashMap};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, BinaryGrid, Mask};
use crate::io::{parse_jsonl, to_jsonl};
use crate::model::{FrameRef, Trajectory};

pub const DEFAULT_CROP_SIZE: u32 = 224;
pub const BLACK: [u8; 3] = [0, 0, 0];
pub const WHITE: [u8; 3] = [255, 255, 255];
const CROP_JPEG_QUALITY: u8 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct CropTask {
    pub frame: FrameRef,
    pub identity: String,
    pub bbox: BBox,
    pub mask: Option<Mask>,
    pub bg_color: [u8; 3],
    pub out_size: (u32, u32),
    pub behavior_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRecord {
    pub filename: String,
    pub frame_global_index: u32,
    pub identity: String,
    #[serde(default)]
    pub behavior_label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CropFormat {
    Jpeg,
    Png,
}

impl CropFormat {
    pub fn extension(self) -> &'static str {
        match self {
            CropFormat::Jpeg => "jpg",
            CropFormat::Png => "png",
        }
    }
}

/// `<7-digit global index>_<identity>.<ext>`
pub fn crop_filename(global_index: u32, identity: &str, format: CropFormat) -> String {
    format!("{global_index:07}_{identity}.{}", format.extension())
}

/// Inverse of [`crop_filename`].
pub fn parse_crop_filename(name: &str) -> Option<(u32, String)> {
    let stem = name.rsplit_once('.').map_or(name, |(s, _)| s);
    let (idx, identity) = stem.split_once('_')?;
    if idx.len() != 7 || identity.is_empty() {
        return None;
    }
    Some((idx.parse().ok()?, identity.to_string()))
}

/// Pixel window `(x0, y0, x1, y1)` of the box after clamping to the frame.
fn crop_window(bbox: &BBox, width: u32, height: u32) -> Option<(u32, u32, u32, u32)> {
    let c = bbox.clamp_to(f64::from(width), f64::from(height));
    let x0 = c.x.floor() as u32;
    let y0 = c.y.floor() as u32;
    let x1 = (c.right().ceil() as u32).min(width);
    let y1 = (c.bottom().ceil() as u32).min(height);
    (c.w > 0.0 && c.h > 0.0 && x1 > x0 && y1 > y0).then_some((x0, y0, x1, y1))
}

/// The box window with every pixel outside the mask set to the background.
pub fn isolate(frame: &RgbImage, task: &CropTask) -> Result<RgbImage> {
    let (w, h) = frame.dimensions();
    let degenerate = || Error::DegenerateCrop { frame: task.frame.global_index, identity: task.identity.clone() };
    task.bbox.validate().map_err(|_| degenerate())?;
    let (x0, y0, x1, y1) = crop_window(&task.bbox, w, h).ok_or_else(degenerate)?;
    let grid: Option<BinaryGrid> = match &task.mask {
        Some(m) => {
            if (m.width, m.height) != (w, h) {
                return Err(Error::InvalidInput(format!(
                    "mask {}x{} does not match frame {w}x{h} ({} at frame {})",
                    m.width, m.height, task.identity, task.frame.global_index
                )));
            }
            Some(m.decode()?)
        }
        None => None,
    };
    let bg = Rgb(task.bg_color);
    Ok(RgbImage::from_fn(x1 - x0, y1 - y0, |i, j| {
        let (x, y) = (x0 + i, y0 + j);
        if grid.as_ref().is_none_or(|g| g.get(x, y)) {
            *frame.get_pixel(x, y)
        } else {
            bg
        }
    }))
}

/// Bilinear resize with aligned corners: corner pixels of the source map
/// exactly onto corner pixels of the output.
pub fn resize_bilinear(src: &RgbImage, out_w: u32, out_h: u32) -> RgbImage {
    let (sw, sh) = src.dimensions();
    if (sw, sh) == (out_w, out_h) {
        return src.clone();
    }
    let coord = |d: u32, dn: u32, sn: u32| -> f64 {
        if dn <= 1 {
            f64::from(sn - 1) / 2.0
        } else {
            f64::from(d) * f64::from(sn - 1) / f64::from(dn - 1)
        }
    };
    RgbImage::from_fn(out_w, out_h, |x, y| {
        let sx = coord(x, out_w, sw);
        let sy = coord(y, out_h, sh);
        let (x0, y0) = (sx.floor() as u32, sy.floor() as u32);
        let (x1, y1) = ((x0 + 1).min(sw - 1), (y0 + 1).min(sh - 1));
        let (fx, fy) = (sx - f64::from(x0), sy - f64::from(y0));
        let mut px = [0u8; 3];
        for (c, out) in px.iter_mut().enumerate() {
            let p = |xx, yy| f64::from(src.get_pixel(xx, yy)[c]);
            let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
            let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
            *out = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
        }
        Rgb(px)
    })
}

/// Isolate, then resize to `task.out_size`.
pub fn crop_instance(frame: &RgbImage, task: &CropTask) -> Result<RgbImage> {
    let (ow, oh) = task.out_size;
    if ow == 0 || oh == 0 {
        return Err(Error::InvalidConfig("crop size must be positive".into()));
    }
    Ok(resize_bilinear(&isolate(frame, task)?, ow, oh))
}

pub fn encode_crop(img: &RgbImage, format: CropFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        CropFormat::Jpeg => {
            let enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut buf, CROP_JPEG_QUALITY);
            img.write_with_encoder(enc)?;
        }
        CropFormat::Png => {
            let enc = image::codecs::png::PngEncoder::new(&mut buf);
            img.write_with_encoder(enc)?;
        }
    }
    Ok(buf)
}

/// Workers to use when none are configured: all cores but two.
pub fn default_workers() -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    cores.saturating_sub(2).max(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropFailure {
    pub frame_global_index: u32,
    pub identity: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CropBatchOutcome {
    pub records: Vec<CropRecord>,
    pub failures: Vec<CropFailure>,
}

#[derive(Debug, Clone)]
pub struct CropBatchConfig {
    pub workers: usize,
    pub format: CropFormat,
    pub out_dir: PathBuf,
}

/// Crops every task on a pool of `workers` threads. Each frame is decoded
/// once; failed tasks are collected instead of aborting the batch. Records
/// and failures come back sorted by (frame, identity).
pub fn crop_batch<F>(tasks: &[CropTask], load_frame: F, cfg: &CropBatchConfig) -> Result<CropBatchOutcome>
where
    F: Fn(&FrameRef) -> Result<RgbImage> + Sync,
{
    if cfg.workers < 1 {
        return Err(Error::InvalidConfig("workers must be at least 1".into()));
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let mut by_frame: BTreeMap<u32, Vec<&CropTask>> = BTreeMap::new();
    for t in tasks {
        by_frame.entry(t.frame.global_index).or_default().push(t);
    }
    let groups: Vec<Vec<&CropTask>> = by_frame.into_values().collect();
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let results: Vec<std::result::Result<CropRecord, CropFailure>> = pool.install(|| {
        groups
            .par_iter()
            .flat_map_iter(|group| {
                let frame = load_frame(&group[0].frame);
                group
                    .iter()
                    .map(|task| {
                        let fail = |e: String| CropFailure {
                            frame_global_index: task.frame.global_index,
                            identity: task.identity.clone(),
                            error: e,
                        };
                        let frame = frame.as_ref().map_err(|e| fail(e.to_string()))?;
                        write_one(frame, task, cfg).map_err(|e| fail(e.to_string()))
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    });
    let mut out = CropBatchOutcome::default();
    for r in results {
        match r {
            Ok(rec) => out.records.push(rec),
            Err(f) => {
                log::warn!("crop skipped: {} at frame {}: {}", f.identity, f.frame_global_index, f.error);
                out.failures.push(f);
            }
        }
    }
    out.records.sort_by(|a, b| (a.frame_global_index, &a.identity).cmp(&(b.frame_global_index, &b.identity)));
    out.failures.sort_by(|a, b| (a.frame_global_index, &a.identity).cmp(&(b.frame_global_index, &b.identity)));
    Ok(out)
}

fn write_one(frame: &RgbImage, task: &CropTask, cfg: &CropBatchConfig) -> Result<CropRecord> {
    let img = crop_instance(frame, task)?;
    let filename = crop_filename(task.frame.global_index, &task.identity, cfg.format);
    let path = cfg.out_dir.join(&filename);
    std::fs::write(&path, encode_crop(&img, cfg.format)?).map_err(|e| Error::io(&path, e))?;
    Ok(CropRecord {
        filename,
        frame_global_index: task.frame.global_index,
        identity: task.identity.clone(),
        behavior_label: task.behavior_label.clone(),
    })
}

/// Builds one task per trajectory entry whose frame is in `frames`.
pub fn plan_crop_tasks(
    trajectories: &[Trajectory],
    frames: &[FrameRef],
    labels: &HashMap<(u32, String), String>,
    bg_color: [u8; 3],
    out_size: (u32, u32),
) -> Vec<CropTask> {
    let by_index: HashMap<u32, &FrameRef> = frames.iter().map(|f| (f.global_index, f)).collect();
    let mut tasks = Vec::new();
    for t in trajectories {
        for (&f, e) in &t.entries {
            let Some(frame) = by_index.get(&f) else { continue };
            tasks.push(CropTask {
                frame: (*frame).clone(),
                identity: t.identity.clone(),
                bbox: e.bbox,
                mask: e.mask.clone(),
                bg_color,
                out_size,
                behavior_label: labels.get(&(f, t.identity.clone())).cloned(),
            });
        }
    }
    tasks.sort_by(|a, b| (a.frame.global_index, &a.identity).cmp(&(b.frame.global_index, &b.identity)));
    tasks
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorLabel {
    pub frame_index: u32,
    pub identity: String,
    pub behavior: String,
}

/// Carries each identity's latest annotation forward until a newer one
/// replaces it. Frames before an identity's first annotation stay unlabeled.
/// Output is sorted by (identity, frame).
pub fn forward_propagate_labels(sparse: &[BehaviorLabel], horizon: RangeInclusive<u32>) -> Result<Vec<BehaviorLabel>> {
    let mut per_id: BTreeMap<&str, BTreeMap<u32, &str>> = BTreeMap::new();
    for l in sparse {
        let slot = per_id.entry(&l.identity).or_default();
        if let Some(prev) = slot.insert(l.frame_index, &l.behavior) {
            if prev != l.behavior {
                return Err(Error::ConflictingAnnotation {
                    identity: l.identity.clone(),
                    frame: l.frame_index,
                    first: prev.to_string(),
                    second: l.behavior.clone(),
                });
            }
        }
    }
    let mut out = Vec::new();
    for (identity, marks) in per_id {
        for f in horizon.clone() {
            if let Some((_, &b)) = marks.range(..=f).next_back() {
                out.push(BehaviorLabel { frame_index: f, identity: identity.to_string(), behavior: b.to_string() });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropManifestHeader {
    pub resize: String,
    pub interpolation: String,
    pub width: u32,
    pub height: u32,
    pub bg_color: [u8; 3],
    pub format: CropFormat,
}

impl CropManifestHeader {
    pub fn new(out_size: (u32, u32), bg_color: [u8; 3], format: CropFormat) -> Self {
        CropManifestHeader {
            resize: "stretch".into(),
            interpolation: "bilinear-aligned-corners".into(),
            width: out_size.0,
            height: out_size.1,
            bg_color,
            format,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CropManifestLine {
    Header(CropManifestHeader),
    Crop(CropRecord),
}

/// The manifest lives next to the crops as `manifest.jsonl`.
pub const CROP_MANIFEST: &str = "manifest.jsonl";

pub fn write_crop_manifest(path: &Path, header: &CropManifestHeader, records: &[CropRecord]) -> Result<()> {
    let mut lines = vec![CropManifestLine::Header(header.clone())];
    lines.extend(records.iter().cloned().map(CropManifestLine::Crop));
    std::fs::write(path, to_jsonl(&lines)).map_err(|e| Error::io(path, e))
}

pub fn read_crop_manifest(path: &Path) -> Result<(Option<CropManifestHeader>, Vec<CropRecord>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut header = None;
    let mut records = Vec::new();
    for line in parse_jsonl::<CropManifestLine>(text.as_bytes(), path)? {
        match line {
            CropManifestLine::Header(h) => header = Some(h),
            CropManifestLine::Crop(r) => records.push(r),
        }
    }
    Ok((header, records))
}
