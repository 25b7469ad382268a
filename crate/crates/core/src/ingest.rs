//! Stride sampling, chunking and the on-disk frame layout.
//!
//! A sequence root holds `chunk_000/`, `chunk_001/`, ... with frames named by
//! their 1-based global index (`0000001.jpg`), plus `manifest.jsonl` listing
//! every frame in order.

use std::ffi::OsStr;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::command;
use crate::error::{Error, Result};
use crate::io::{read_jsonl, write_jsonl};
use crate::model::FrameRef;

pub const DEFAULT_MAX_CHUNK: usize = 3000;
pub const MANIFEST_FILE: &str = "manifest.jsonl";
const MAX_GLOBAL_INDEX: u64 = 9_999_999;
const FRAME_JPEG_QUALITY: u8 = 95;

/// Source indices kept when saving every `stride`-th frame.
pub fn plan_frames(total: usize, stride: usize) -> Result<Vec<usize>> {
    if stride < 1 {
        return Err(Error::InvalidConfig("stride must be at least 1".into()));
    }
    Ok((0..total).step_by(stride).collect())
}

/// Greedy chunk sizes: full chunks followed by one partial chunk.
pub fn chunk_frames(n_selected: usize, max_chunk: usize) -> Result<Vec<usize>> {
    if max_chunk < 1 {
        return Err(Error::InvalidConfig("max_chunk must be at least 1".into()));
    }
    let mut sizes = vec![max_chunk; n_selected / max_chunk];
    if !n_selected.is_multiple_of(max_chunk) {
        sizes.push(n_selected % max_chunk);
    }
    Ok(sizes)
}

pub fn frame_name(global_index: u64) -> Result<String> {
    if !(1..=MAX_GLOBAL_INDEX).contains(&global_index) {
        return Err(Error::NamingOverflow(global_index));
    }
    Ok(format!("{global_index:07}.jpg"))
}

/// Parses `0000042.jpg` (or any extension) back to 42.
pub fn parse_frame_name(name: &str) -> Option<u32> {
    let stem = name.split('.').next()?;
    if stem.len() != 7 || !stem.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    stem.parse().ok()
}

pub fn chunk_dir_name(chunk_id: u32) -> String {
    format!("chunk_{chunk_id:03}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSpec {
    pub chunk_id: u32,
    pub first_global_index: u32,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestPlan {
    pub total_source_frames: usize,
    pub stride: usize,
    pub selected: Vec<usize>,
    pub chunks: Vec<ChunkSpec>,
}

impl IngestPlan {
    pub fn new(total: usize, stride: usize, max_chunk: usize) -> Result<Self> {
        let selected = plan_frames(total, stride)?;
        if selected.len() as u64 > MAX_GLOBAL_INDEX {
            return Err(Error::NamingOverflow(selected.len() as u64));
        }
        let mut chunks = Vec::new();
        let mut next = 1u32;
        for (i, count) in chunk_frames(selected.len(), max_chunk)?.into_iter().enumerate() {
            chunks.push(ChunkSpec { chunk_id: i as u32, first_global_index: next, count });
            next += count as u32;
        }
        Ok(IngestPlan { total_source_frames: total, stride, selected, chunks })
    }

    /// Frame references in global order, paired with their source index.
    pub fn frames(&self) -> Vec<(FrameRef, usize)> {
        let mut out = Vec::with_capacity(self.selected.len());
        let mut it = self.selected.iter();
        for c in &self.chunks {
            for k in 0..c.count {
                let global_index = c.first_global_index + k as u32;
                let source = *it.next().expect("chunk counts cover the selection");
                let filename = frame_name(u64::from(global_index)).expect("plan checked range");
                out.push((FrameRef { global_index, chunk_id: c.chunk_id, filename }, source));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub global_index: u32,
    pub chunk_id: u32,
    pub filename: String,
    pub source_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ManifestRecord {
    pub fn frame_ref(&self) -> FrameRef {
        FrameRef { global_index: self.global_index, chunk_id: self.chunk_id, filename: self.filename.clone() }
    }
}

/// A materialized sequence root.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceLayout {
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl SequenceLayout {
    pub fn open(root: &Path) -> Result<Self> {
        let records = read_jsonl(&root.join(MANIFEST_FILE))?;
        Ok(SequenceLayout { root: root.to_path_buf(), records })
    }

    pub fn chunk_dir(&self, chunk_id: u32) -> PathBuf {
        self.root.join(chunk_dir_name(chunk_id))
    }

    pub fn frame_path(&self, record: &ManifestRecord) -> PathBuf {
        self.chunk_dir(record.chunk_id).join(&record.filename)
    }

    pub fn record(&self, global_index: u32) -> Option<&ManifestRecord> {
        let i = self.records.binary_search_by_key(&global_index, |r| r.global_index).ok()?;
        Some(&self.records[i])
    }

    pub fn chunk_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.records.iter().map(|r| r.chunk_id).collect();
        ids.dedup();
        ids
    }

    /// Records of one chunk, in global order.
    pub fn chunk(&self, chunk_id: u32) -> Vec<&ManifestRecord> {
        self.records.iter().filter(|r| r.chunk_id == chunk_id).collect()
    }

    pub fn load_frame(&self, global_index: u32) -> Result<image::RgbImage> {
        let rec = self.record(global_index).ok_or_else(|| Error::InvalidInput(format!("frame {global_index} not in layout")))?;
        let path = self.frame_path(rec);
        Ok(image::open(&path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?.to_rgb8())
    }
}

#[derive(Debug, Clone)]
pub enum Source {
    ImageDir(PathBuf),
    /// Decoded by `decoder_cmd`, which receives `{input}`, `{stride}` and
    /// `{output_dir}`. The command writes images into `{output_dir}`; when the
    /// template mentions `{stride}` its output is taken as already sampled.
    Video {
        path: PathBuf,
        decoder_cmd: String,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct IngestConfig {
    pub stride: usize,
    pub max_chunk: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig { stride: 1, max_chunk: DEFAULT_MAX_CHUNK }
    }
}

/// Lists the regular, non-hidden files of `dir` in lexicographic order.
pub fn list_source_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if !hidden && entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

pub fn ingest(source: &Source, cfg: IngestConfig, out_root: &Path) -> Result<SequenceLayout> {
    std::fs::create_dir_all(out_root).map_err(|e| Error::io(out_root, e))?;
    clear_previous(out_root)?;
    match source {
        Source::ImageDir(dir) => ingest_dir(dir, cfg, 1, out_root),
        Source::Video { path, decoder_cmd } => {
            let tmp = out_root.join(".decode");
            if tmp.exists() {
                std::fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
            }
            std::fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
            let stride = cfg.stride.to_string();
            command::run(
                decoder_cmd,
                &[("input", &path.to_string_lossy()), ("stride", &stride), ("output_dir", &tmp.to_string_lossy())],
            )
            .map_err(|f| Error::Decode { status: f.status, stderr: f.stderr })?;
            let layout = if decoder_cmd.contains("{stride}") {
                ingest_dir(&tmp, IngestConfig { stride: 1, ..cfg }, cfg.stride, out_root)
            } else {
                ingest_dir(&tmp, cfg, 1, out_root)
            };
            std::fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
            layout
        }
    }
}

fn clear_previous(out_root: &Path) -> Result<()> {
    for entry in std::fs::read_dir(out_root).map_err(|e| Error::io(out_root, e))? {
        let entry = entry.map_err(|e| Error::io(out_root, e))?;
        let name = entry.file_name();
        if name.to_string_lossy().starts_with("chunk_") && entry.path().is_dir() {
            std::fs::remove_dir_all(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
        }
    }
    Ok(())
}

/// `source_scale` converts positions in `dir` back to source-video indices
/// when the decoder already applied the stride.
fn ingest_dir(dir: &Path, cfg: IngestConfig, source_scale: usize, out_root: &Path) -> Result<SequenceLayout> {
    let files = list_source_frames(dir)?;
    let plan = IngestPlan::new(files.len(), cfg.stride, cfg.max_chunk)?;
    for c in &plan.chunks {
        let d = out_root.join(chunk_dir_name(c.chunk_id));
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut records: Vec<ManifestRecord> = plan
        .frames()
        .into_par_iter()
        .map(|(frame, source)| {
            let dest = out_root.join(chunk_dir_name(frame.chunk_id)).join(&frame.filename);
            let error = materialize_frame(&files[source], &dest).err();
            if let Some(e) = &error {
                log::warn!("frame {} ({}): {e}", frame.global_index, files[source].display());
            }
            ManifestRecord {
                global_index: frame.global_index,
                chunk_id: frame.chunk_id,
                filename: frame.filename,
                source_index: source * source_scale,
                error,
            }
        })
        .collect();
    records.sort_by_key(|r| r.global_index);
    let manifest = out_root.join(MANIFEST_FILE);
    write_jsonl(&manifest, &records)?;
    Ok(SequenceLayout { root: out_root.to_path_buf(), records })
}

/// Copies JPEG sources verbatim; other formats are decoded and re-encoded.
fn materialize_frame(src: &Path, dest: &Path) -> std::result::Result<(), String> {
    let is_jpeg = matches!(src.extension().and_then(OsStr::to_str).map(str::to_ascii_lowercase).as_deref(), Some("jpg" | "jpeg"));
    let bytes = std::fs::read(src).map_err(|e| e.to_string())?;
    let img = image::load_from_memory(&bytes).map_err(|e| e.to_string())?;
    if is_jpeg {
        std::fs::write(dest, &bytes).map_err(|e| e.to_string())
    } else {
        write_jpeg(&img.to_rgb8(), dest, FRAME_JPEG_QUALITY).map_err(|e| e.to_string())
    }
}

pub fn write_jpeg(img: &image::RgbImage, dest: &Path, quality: u8) -> Result<()> {
    let file = std::fs::File::create(dest).map_err(|e| Error::io(dest, e))?;
    let mut w = std::io::BufWriter::new(file);
    let enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut w, quality);
    img.write_with_encoder(enc)?;
    Ok(())
}
