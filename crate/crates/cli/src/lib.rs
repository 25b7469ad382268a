//! Stage orchestration for the `herdpipe` command-line tool.
//!
//! Every stage reads and writes files under one layout root. Inputs and
//! outputs are digested into an append-only ledger, and `run` skips stages
//! whose inputs and outputs are unchanged since their last successful run.

pub mod config;
pub mod error;
pub mod ledger;
pub mod review;
mod stages;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub use config::PipelineConfig;
pub use error::CliError;
pub use ledger::{LedgerEntry, RootLock, RunLedger, StageStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, clap::ValueEnum)]
pub enum Stage {
    Synth,
    Ingest,
    DetectIngest,
    DetectFilter,
    Track,
    Crop,
    Embed,
    Train,
    EvalDet,
    EvalMot,
    EvalCls,
    Tsne,
    Overlay,
}

impl Stage {
    pub const ALL: [Stage; 13] = [
        Stage::Synth,
        Stage::Ingest,
        Stage::DetectIngest,
        Stage::DetectFilter,
        Stage::Track,
        Stage::Crop,
        Stage::Embed,
        Stage::Train,
        Stage::EvalDet,
        Stage::EvalMot,
        Stage::EvalCls,
        Stage::Tsne,
        Stage::Overlay,
    ];

    /// What `run` executes when no stages are named.
    pub const DEFAULT_RUN: [Stage; 10] = [
        Stage::Ingest,
        Stage::DetectIngest,
        Stage::DetectFilter,
        Stage::Track,
        Stage::Crop,
        Stage::Embed,
        Stage::Train,
        Stage::EvalDet,
        Stage::EvalMot,
        Stage::EvalCls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::DetectIngest => "detect-ingest",
            Stage::DetectFilter => "detect-filter",
            Stage::Track => "track",
            Stage::Crop => "crop",
            Stage::Embed => "embed",
            Stage::Train => "train",
            Stage::EvalDet => "eval-det",
            Stage::EvalMot => "eval-mot",
            Stage::EvalCls => "eval-cls",
            Stage::Tsne => "tsne",
            Stage::Overlay => "overlay",
        }
    }
}

/// Named file slots. Each has a conventional location under the root and
/// can be pointed elsewhere per invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    SynthDir,
    Source,
    Candidates,
    Layout,
    Detections,
    Filtered,
    Seeds,
    Tracks,
    GtTracks,
    GtBoxes,
    Labels,
    Crops,
    Store,
    Model,
    History,
    Reports,
    Tsne,
    Overlays,
}

impl Slot {
    pub fn name(self) -> &'static str {
        match self {
            Slot::SynthDir => "synth",
            Slot::Source => "source",
            Slot::Candidates => "candidates",
            Slot::Layout => "layout",
            Slot::Detections => "detections",
            Slot::Filtered => "filtered",
            Slot::Seeds => "seeds",
            Slot::Tracks => "tracks",
            Slot::GtTracks => "gt_tracks",
            Slot::GtBoxes => "gt_boxes",
            Slot::Labels => "labels",
            Slot::Crops => "crops",
            Slot::Store => "store",
            Slot::Model => "model",
            Slot::History => "history",
            Slot::Reports => "reports",
            Slot::Tsne => "tsne",
            Slot::Overlays => "overlays",
        }
    }
}

pub const SEEDS_AUTO: &str = "seeds_auto.jsonl";
pub const SEEDS_REVIEWED: &str = "seeds.jsonl";

/// A configured invocation: settings plus per-run path overrides.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: PipelineConfig,
    pub overrides: BTreeMap<Slot, PathBuf>,
    /// Split evaluated by `eval-cls`.
    pub split: EvalSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    Train,
    Val,
    Test,
}

impl Context {
    pub fn new(config: PipelineConfig) -> Self {
        Context { config, overrides: BTreeMap::new(), split: EvalSplit::Test }
    }

    pub fn root(&self) -> &Path {
        &self.config.paths.root
    }

    pub fn with(mut self, slot: Slot, path: impl Into<PathBuf>) -> Self {
        self.overrides.insert(slot, path.into());
        self
    }

    pub fn path(&self, slot: Slot) -> PathBuf {
        if let Some(p) = self.overrides.get(&slot) {
            return p.clone();
        }
        let root = self.root();
        let synth = root.join("synth");
        let paths = &self.config.paths;
        match slot {
            Slot::SynthDir => synth,
            Slot::Source => self.config.ingest.source.clone().unwrap_or_else(|| synth.join("frames")),
            Slot::Candidates => self.config.detect.candidates.clone().unwrap_or_else(|| synth.join("detections.jsonl")),
            Slot::Layout => root.join("frames"),
            Slot::Detections => root.join("detections/candidates.jsonl"),
            Slot::Filtered => root.join("detections/filtered.jsonl"),
            Slot::Seeds => {
                let reviewed = root.join("detections").join(SEEDS_REVIEWED);
                if reviewed.exists() {
                    reviewed
                } else {
                    root.join("detections").join(SEEDS_AUTO)
                }
            }
            Slot::Tracks => root.join("tracks/tracks.jsonl"),
            Slot::GtTracks => paths.gt_tracks.clone().unwrap_or_else(|| synth.join("gt_tracks.jsonl")),
            Slot::GtBoxes => paths.gt_boxes.clone().unwrap_or_else(|| self.path(Slot::GtTracks)),
            Slot::Labels => paths.labels.clone().unwrap_or_else(|| synth.join("labels.jsonl")),
            Slot::Crops => root.join("crops"),
            Slot::Store => root.join("embeddings"),
            Slot::Model => root.join("models/model.ckpt"),
            Slot::History => root.join("models/history.json"),
            Slot::Reports => root.join("reports"),
            Slot::Tsne => root.join("reports/tsne.csv"),
            Slot::Overlays => root.join("overlays"),
        }
    }

    pub fn sequence_name(&self) -> String {
        self.config
            .paths
            .sequence_name
            .clone()
            .unwrap_or_else(|| self.root().file_name().map_or_else(|| "sequence".into(), |n| n.to_string_lossy().into_owned()))
    }
}

/// A stage's declared inputs and outputs.
#[derive(Debug, Clone, Default)]
pub struct StageIo {
    /// `(slot, path, required)`.
    pub inputs: Vec<(Slot, PathBuf, bool)>,
    pub outputs: Vec<(Slot, PathBuf)>,
}

fn digests(items: impl IntoIterator<Item = (Slot, PathBuf)>) -> Result<BTreeMap<String, String>, std::io::Error> {
    let mut out = BTreeMap::new();
    for (slot, path) in items {
        if let Some(d) = ledger::digest_path(&path)? {
            out.insert(format!("{}:{}", slot.name(), path.display()), d);
        }
    }
    Ok(out)
}

fn input_digests(ctx: &Context, stage: Stage, io: &StageIo) -> Result<BTreeMap<String, String>, CliError> {
    let mut d = digests(io.inputs.iter().map(|(s, p, _)| (*s, p.clone()))).map_err(|e| CliError::stage(stage.name(), e))?;
    d.insert("config".into(), ledger::digest_bytes(ctx.config.section_json(stage).as_bytes()));
    Ok(d)
}

/// Runs one stage and records it in the ledger. With `force == false`
/// the stage is skipped when its last successful run saw the same input
/// digests and its outputs are untouched since.
pub fn run_stage(ctx: &Context, stage: Stage, force: bool) -> Result<StageStatus, CliError> {
    let io = stages::io(ctx, stage);
    for (_, path, required) in &io.inputs {
        if *required && !path.exists() {
            return Err(CliError::Dependency { stage: stage.name().into(), path: path.clone() });
        }
    }
    let ledger = RunLedger::new(ctx.root());
    let started = ledger::now();
    let inputs = input_digests(ctx, stage, &io)?;
    let record = |status, outputs, error| {
        ledger
            .append(&LedgerEntry {
                stage: stage.name().into(),
                status,
                inputs: inputs.clone(),
                outputs,
                started,
                finished: ledger::now(),
                tool_version: ledger::TOOL_VERSION.into(),
                error,
            })
            .map_err(|e| CliError::stage(stage.name(), e))
    };
    if !force {
        if let Some(prev) = ledger.last_ok(stage.name()).map_err(|e| CliError::stage(stage.name(), e))? {
            let current = digests(io.outputs.iter().cloned()).map_err(|e| CliError::stage(stage.name(), e))?;
            if prev.inputs == inputs && !current.is_empty() && prev.outputs == current {
                log::info!("{}: inputs unchanged, skipping", stage.name());
                record(StageStatus::Skipped, current, None)?;
                return Ok(StageStatus::Skipped);
            }
        }
    }
    log::info!("{}: running", stage.name());
    match stages::exec(ctx, stage) {
        Ok(()) => {
            let outputs = digests(io.outputs.iter().cloned()).map_err(|e| CliError::stage(stage.name(), e))?;
            record(StageStatus::Ok, outputs, None)?;
            Ok(StageStatus::Ok)
        }
        Err(e) => {
            record(StageStatus::Failed, BTreeMap::new(), Some(format!("{e:#}")))?;
            Err(classify(stage, e))
        }
    }
}

fn classify(stage: Stage, e: anyhow::Error) -> CliError {
    if let Some(herdpipe_core::Error::InvalidConfig(m)) = e.downcast_ref::<herdpipe_core::Error>() {
        return CliError::Config(format!("{}: {m}", stage.name()));
    }
    match e.downcast::<CliError>() {
        Ok(c) => c,
        Err(e) => CliError::stage(stage.name(), e),
    }
}

/// Runs `stages` in pipeline order under the root lock. A failure halts
/// every later stage.
pub fn run_pipeline(ctx: &Context, stages: &[Stage], force: bool) -> Result<Vec<(Stage, StageStatus)>, CliError> {
    let _lock = RootLock::acquire(ctx.root())?;
    let mut ordered: Vec<Stage> = stages.to_vec();
    ordered.sort();
    ordered.dedup();
    let mut done = Vec::new();
    for stage in ordered {
        done.push((stage, run_stage(ctx, stage, force)?));
    }
    Ok(done)
}
