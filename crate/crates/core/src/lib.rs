//! Building blocks for per-animal behavior analysis from video: frame
//! layout, detection filtering and evaluation, chunked tracking with
//! CLEAR-MOT/IDF1 scoring, instance cropping, embedding stores, and
//! frame-level and temporal behavior classifiers.

pub mod command;
pub mod crop;
pub mod detect;
pub mod embed;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod io;
pub mod learn;
pub mod model;
pub mod overlay;
pub mod synth;
pub mod track;

pub use error::{Error, Result};
pub use geometry::{iou, BBox, BinaryGrid, Mask};
pub use model::{Detection, FrameRef, Provenance, Seed, SeedSet, TrackEntry, Trajectory};
