//! Embeddings: the built-in toy embedder, the `EMB1` file format, on-disk
//! stores, external embedder adapters and t-SNE projection.

mod store;
mod toy;
mod tsne;

pub use store::{
    decode_embedding, embed_crops, encode_embedding, read_embedding, run_external_embedder, write_embedding, EmbeddingRecord,
    EmbeddingStore, StoreRow, EMBEDDING_EXTENSION, EMBEDDING_MAGIC, STORE_MANIFEST,
};
pub use toy::{toy_embedder, TOY_DIM, TOY_GRID};
pub use tsne::{tsne, TsneConfig, TsneResult};

/// Dimension produced by the DINOv2-large adapter.
pub const DINOV2_LARGE_DIM: usize = 1024;
