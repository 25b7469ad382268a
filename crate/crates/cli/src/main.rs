use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use herdpipe_cli::config::{Background, EmbedderKind, TrackerKind};
use herdpipe_cli::review::ReviewServer;
use herdpipe_cli::{run_pipeline, run_stage, CliError, Context, EvalSplit, PipelineConfig, RootLock, Slot, Stage};
use herdpipe_core::learn::ModelKind;

#[derive(Parser)]
#[command(name = "herdpipe", version, about = "File-oriented pipeline for per-animal behavior analysis from video")]
struct Cli {
    /// Pipeline configuration (TOML). Without it every setting takes its default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Layout root, overriding `paths.root`.
    #[arg(long, global = true)]
    root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic blob sequence with ground truth.
    Synth {
        #[arg(long)]
        n_objects: Option<usize>,
        #[arg(long)]
        n_frames: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample and chunk frames from a video or image directory.
    Ingest {
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        max_chunk: Option<usize>,
        #[arg(long)]
        decoder_cmd: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate and store detector output.
    DetectIngest {
        #[arg(long)]
        det: Option<PathBuf>,
    },
    /// Keep targeted, confident detections and derive tracking seeds.
    DetectFilter {
        #[arg(long, value_delimiter = ',')]
        labels: Option<Vec<String>>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Serve the seed-review endpoints.
    ReviewServe {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Track seeded identities through every chunk.
    Track {
        #[arg(long, value_enum)]
        tracker: Option<TrackerKind>,
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cut out every tracked instance.
    Crop {
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long)]
        tracks: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, value_enum)]
        bg: Option<Background>,
        #[arg(long)]
        size: Option<u32>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Embed crops into a store.
    Embed {
        #[arg(long, value_enum)]
        embedder: Option<EmbedderKind>,
        #[arg(long)]
        crops: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a behavior classifier on a store.
    Train {
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score detections against ground truth.
    EvalDet {
        #[arg(long)]
        iou: Option<f64>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        det: Option<PathBuf>,
        #[command(flatten)]
        report: ReportArg,
    },
    /// Score trajectories against ground truth.
    EvalMot {
        #[arg(long)]
        iou: Option<f64>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        pred: Option<PathBuf>,
        #[command(flatten)]
        report: ReportArg,
    },
    /// Evaluate a trained classifier on one split.
    EvalCls {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: EvalSplit,
        #[command(flatten)]
        report: ReportArg,
    },
    /// Project a store to two dimensions.
    Tsne {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        perplexity: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw tracks (or seeds) over one frame.
    Overlay {
        #[arg(long)]
        frame: Option<u32>,
        #[arg(long)]
        tracks: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several stages in order, skipping those whose inputs are unchanged.
    Run {
        #[arg(long, value_enum, value_delimiter = ',')]
        stages: Option<Vec<Stage>>,
        /// Rerun stages even when nothing changed.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct ReportArg {
    /// Report directory.
    #[arg(long = "report")]
    dir: Option<PathBuf>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn load(cli: &Cli) -> Result<Context, CliError> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(r) = &cli.root {
        config.paths.root = r.clone();
    }
    Ok(Context::new(config))
}

fn slot(ctx: &mut Context, slot: Slot, path: Option<PathBuf>) {
    if let Some(p) = path {
        ctx.overrides.insert(slot, p);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut ctx = load(&cli)?;
    let cfg = &mut ctx.config;
    let stage = match cli.command {
        Command::Run { stages, force } => {
            ctx.config.validate()?;
            let stages = stages.unwrap_or_else(|| Stage::DEFAULT_RUN.to_vec());
            for (stage, status) in run_pipeline(&ctx, &stages, force)? {
                println!("{}\t{status:?}", stage.name());
            }
            return Ok(());
        }
        Command::ReviewServe { port, host } => {
            let server = ReviewServer::start(&ctx, &format!("{host}:{port}"))?;
            println!("serving http://{}", server.addr());
            server.wait();
            return Ok(());
        }
        Command::Synth { n_objects, n_frames, seed, out } => {
            set(&mut cfg.synth.n_objects, n_objects);
            set(&mut cfg.synth.n_frames, n_frames);
            set(&mut cfg.synth.seed, seed);
            slot(&mut ctx, Slot::SynthDir, out);
            Stage::Synth
        }
        Command::Ingest { source, stride, max_chunk, decoder_cmd, out } => {
            set(&mut cfg.ingest.stride, stride);
            set(&mut cfg.ingest.max_chunk, max_chunk);
            if decoder_cmd.is_some() {
                cfg.ingest.decoder_cmd = decoder_cmd;
            }
            slot(&mut ctx, Slot::Source, source);
            slot(&mut ctx, Slot::Layout, out);
            Stage::Ingest
        }
        Command::DetectIngest { det } => {
            slot(&mut ctx, Slot::Candidates, det);
            Stage::DetectIngest
        }
        Command::DetectFilter { labels, threshold } => {
            set(&mut cfg.detect.labels, labels);
            set(&mut cfg.detect.threshold, threshold);
            Stage::DetectFilter
        }
        Command::Track { tracker, seeds, layout, out } => {
            set(&mut cfg.track.tracker, tracker);
            slot(&mut ctx, Slot::Seeds, seeds);
            slot(&mut ctx, Slot::Layout, layout);
            slot(&mut ctx, Slot::Tracks, out);
            Stage::Track
        }
        Command::Crop { layout, tracks, labels, bg, size, workers } => {
            set(&mut cfg.crop.bg, bg);
            set(&mut cfg.crop.size, size);
            if workers.is_some() {
                cfg.crop.workers = workers;
            }
            slot(&mut ctx, Slot::Layout, layout);
            slot(&mut ctx, Slot::Tracks, tracks);
            slot(&mut ctx, Slot::Labels, labels);
            Stage::Crop
        }
        Command::Embed { embedder, crops, out } => {
            set(&mut cfg.embed.embedder, embedder);
            slot(&mut ctx, Slot::Crops, crops);
            slot(&mut ctx, Slot::Store, out);
            Stage::Embed
        }
        Command::Train { model, store, out } => {
            set(&mut cfg.learn.model, model);
            slot(&mut ctx, Slot::Store, store);
            slot(&mut ctx, Slot::Model, out);
            Stage::Train
        }
        Command::EvalDet { iou, gt, det, report } => {
            set(&mut cfg.detect.iou, iou);
            slot(&mut ctx, Slot::GtBoxes, gt);
            slot(&mut ctx, Slot::Detections, det);
            slot(&mut ctx, Slot::Reports, report.dir);
            Stage::EvalDet
        }
        Command::EvalMot { iou, gt, pred, report } => {
            set(&mut cfg.track.iou, iou);
            slot(&mut ctx, Slot::GtTracks, gt);
            slot(&mut ctx, Slot::Tracks, pred);
            slot(&mut ctx, Slot::Reports, report.dir);
            Stage::EvalMot
        }
        Command::EvalCls { model, store, split, report } => {
            ctx.split = split;
            slot(&mut ctx, Slot::Model, model);
            slot(&mut ctx, Slot::Store, store);
            slot(&mut ctx, Slot::Reports, report.dir);
            Stage::EvalCls
        }
        Command::Tsne { store, out, perplexity, seed } => {
            set(&mut cfg.tsne.perplexity, perplexity);
            set(&mut cfg.tsne.seed, seed);
            slot(&mut ctx, Slot::Store, store);
            slot(&mut ctx, Slot::Tsne, out);
            Stage::Tsne
        }
        Command::Overlay { frame, tracks, out } => {
            set(&mut cfg.overlay.frame, frame);
            slot(&mut ctx, Slot::Tracks, tracks);
            slot(&mut ctx, Slot::Overlays, out);
            Stage::Overlay
        }
    };
    ctx.config.validate()?;
    let _lock = RootLock::acquire(ctx.root())?;
    run_stage(&ctx, stage, true)?;
    Ok(())
}
