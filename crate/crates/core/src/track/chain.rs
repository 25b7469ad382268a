use crate::error::Result;
use crate::model::{Provenance, Seed, SeedSet, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    pub seeds: SeedSet,
    /// Identities with no entry in the final `window` frames.
    pub dropped: Vec<String>,
}

/// Seeds for the next chunk: each identity's latest box within the final
/// `window` frames ending at `chunk_end`, taken from its mask when present.
pub fn chain_chunks(prev: &[Trajectory], chunk_end: u32, window: u32) -> Result<ChainOutcome> {
    let window = window.max(1);
    let earliest = chunk_end.saturating_sub(window - 1);
    let mut seeds = Vec::new();
    let mut dropped = Vec::new();
    for t in prev {
        let mut found = None;
        for (&f, e) in t.entries.range(earliest..=chunk_end).rev() {
            let bbox = match &e.mask {
                Some(m) if m.area() > 0 => m.to_bbox()?,
                Some(_) => continue,
                None => e.bbox,
            };
            found = Some(Seed { object_name: t.identity.clone(), bbox, frame: f });
            break;
        }
        match found {
            Some(s) => seeds.push(s),
            None => dropped.push(t.identity.clone()),
        }
    }
    Ok(ChainOutcome { seeds: SeedSet { frame: chunk_end, seeds, provenance: Provenance::AutoFiltered }, dropped })
}
