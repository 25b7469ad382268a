//! The pipeline configuration file.

use std::path::{Path, PathBuf};

use herdpipe_core::crop::{CropFormat, BLACK, DEFAULT_CROP_SIZE, WHITE};
use herdpipe_core::embed::TsneConfig;
use herdpipe_core::ingest::DEFAULT_MAX_CHUNK;
use herdpipe_core::learn::{ModelKind, TrainConfig, WindowConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub ingest: IngestSection,
    pub detect: DetectSection,
    pub track: TrackSection,
    pub crop: CropSection,
    pub embed: EmbedSection,
    pub learn: LearnSection,
    pub tsne: TsneSection,
    pub overlay: OverlaySection,
    pub synth: SynthSection,
}

/// Relative paths are resolved against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub root: PathBuf,
    /// Ground-truth trajectories, used by the oracle tracker and `eval-mot`.
    pub gt_tracks: Option<PathBuf>,
    /// Ground-truth boxes for `eval-det`; defaults to `gt_tracks`.
    pub gt_boxes: Option<PathBuf>,
    /// Sparse behavior annotations, carried forward to every frame.
    pub labels: Option<PathBuf>,
    pub sequence_name: Option<String>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig { root: PathBuf::from("herdpipe-run"), gt_tracks: None, gt_boxes: None, labels: None, sequence_name: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestSection {
    /// Image directory or video file. Defaults to the synthetic frames.
    pub source: Option<PathBuf>,
    pub decoder_cmd: Option<String>,
    pub stride: usize,
    pub max_chunk: usize,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection { source: None, decoder_cmd: None, stride: 1, max_chunk: DEFAULT_MAX_CHUNK }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectSection {
    /// Detector output to ingest. Defaults to the synthetic detections.
    pub candidates: Option<PathBuf>,
    pub labels: Vec<String>,
    pub threshold: f64,
    pub iou: f64,
    pub naming_prefix: String,
}

impl Default for DetectSection {
    fn default() -> Self {
        DetectSection { candidates: None, labels: vec!["pig".into()], threshold: 0.5, iou: 0.5, naming_prefix: "pig".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TrackerKind {
    External,
    Naive,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackSection {
    pub tracker: TrackerKind,
    /// Template with `{chunk_dir}`, `{seeds_file}` and `{out_file}`.
    pub cmd: Option<String>,
    pub iou_floor: f64,
    pub chain_window: u32,
    pub iou: f64,
}

impl Default for TrackSection {
    fn default() -> Self {
        TrackSection { tracker: TrackerKind::Naive, cmd: None, iou_floor: 0.3, chain_window: 1, iou: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Background {
    Black,
    White,
}

impl Background {
    pub fn rgb(self) -> [u8; 3] {
        match self {
            Background::Black => BLACK,
            Background::White => WHITE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CropSection {
    pub bg: Background,
    pub size: u32,
    /// Defaults to the machine's cores minus two.
    pub workers: Option<usize>,
    pub format: CropFormat,
}

impl Default for CropSection {
    fn default() -> Self {
        CropSection { bg: Background::Black, size: DEFAULT_CROP_SIZE, workers: None, format: CropFormat::Jpeg }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Toy,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedSection {
    pub embedder: EmbedderKind,
    /// Template with `{manifest}`, `{out_dir}` and `{dim}`.
    pub cmd: Option<String>,
    pub dim: usize,
}

impl Default for EmbedSection {
    fn default() -> Self {
        EmbedSection { embedder: EmbedderKind::Toy, cmd: None, dim: herdpipe_core::embed::DINOV2_LARGE_DIM }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnSection {
    pub model: ModelKind,
    pub train: TrainConfig,
    pub window: WindowConfig,
    /// Frames per contiguous block when splitting sequences for the BiLSTM.
    pub block_len: usize,
}

impl Default for LearnSection {
    fn default() -> Self {
        LearnSection { model: ModelKind::Mlp, train: TrainConfig::default(), window: WindowConfig::default(), block_len: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TsneSection {
    pub perplexity: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for TsneSection {
    fn default() -> Self {
        let d = TsneConfig::default();
        TsneSection { perplexity: d.perplexity, iterations: d.iterations, seed: d.seed }
    }
}

impl TsneSection {
    pub fn to_config(&self) -> TsneConfig {
        TsneConfig { perplexity: self.perplexity, iterations: self.iterations, seed: self.seed, ..TsneConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OverlaySection {
    pub frame: u32,
    pub palette_seed: u64,
}

impl Default for OverlaySection {
    fn default() -> Self {
        OverlaySection { frame: 1, palette_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub n_objects: usize,
    pub n_frames: u32,
    /// Frames per scripted behavior segment.
    pub segment: u32,
    pub seed: u64,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection { n_objects: 4, n_frames: 600, segment: 50, seed: 0 }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.root);
        for p in [
            &mut self.paths.gt_tracks,
            &mut self.paths.gt_boxes,
            &mut self.paths.labels,
            &mut self.ingest.source,
            &mut self.detect.candidates,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.ingest.stride == 0 || self.ingest.max_chunk == 0 {
            return bad("ingest.stride and ingest.max_chunk must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.detect.threshold) {
            return bad("detect.threshold must lie in [0, 1]");
        }
        for (name, v) in [("detect.iou", self.detect.iou), ("track.iou", self.track.iou)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(CliError::Config(format!("{name} must lie in (0, 1]")));
            }
        }
        if self.detect.labels.is_empty() {
            return bad("detect.labels must name at least one class");
        }
        if self.track.tracker == TrackerKind::External && self.track.cmd.is_none() {
            return bad("track.cmd is required for the external tracker");
        }
        if self.embed.embedder == EmbedderKind::External && self.embed.cmd.is_none() {
            return bad("embed.cmd is required for the external embedder");
        }
        if self.crop.size == 0 || self.crop.workers == Some(0) {
            return bad("crop.size and crop.workers must be at least 1");
        }
        if self.learn.window.length == 0 || self.learn.window.stride == 0 || self.learn.block_len == 0 {
            return bad("window length, stride and block_len must be at least 1");
        }
        self.learn.train.validate().map_err(|e| CliError::Config(e.to_string()))
    }

    /// Stable digest input for one stage's settings.
    pub fn section_json(&self, stage: crate::Stage) -> String {
        use crate::Stage::*;
        let v = match stage {
            Ingest => serde_json::to_value(&self.ingest),
            DetectIngest | DetectFilter | EvalDet => serde_json::to_value(&self.detect),
            Track | EvalMot => serde_json::to_value(&self.track),
            Crop => serde_json::to_value(&self.crop),
            Embed => serde_json::to_value(&self.embed),
            Train | EvalCls => serde_json::to_value(&self.learn),
            Tsne => serde_json::to_value(&self.tsne),
            Overlay => serde_json::to_value(&self.overlay),
            Synth => serde_json::to_value(&self.synth),
        };
        v.map(|v| v.to_string()).unwrap_or_default()
    }
}
