use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::toy::toy_embedder;
use crate::command;
use crate::crop::CropRecord;
use crate::error::{Error, Result};
use crate::io::{read_jsonl, write_jsonl};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"EMB1";
pub const EMBEDDING_EXTENSION: &str = "emb";
pub const STORE_MANIFEST: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub crop_filename: String,
    pub vector: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// `EMB1` | dim (u32 LE) | dim x f32 LE.
pub fn encode_embedding(vector: &[f32]) -> Result<Vec<u8>> {
    if vector.is_empty() {
        return Err(Error::InvalidInput("embedding dimension must be at least 1".into()));
    }
    if let Some(v) = vector.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite embedding component {v}")));
    }
    let dim = u32::try_from(vector.len()).map_err(|_| Error::InvalidInput("embedding too large".into()))?;
    let mut out = Vec::with_capacity(8 + 4 * vector.len());
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&dim.to_le_bytes());
    for v in vector {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_embedding(bytes: &[u8]) -> Result<Vec<f32>> {
    if bytes.len() < 4 || &bytes[..4] != EMBEDDING_MAGIC {
        return Err(Error::NotAnEmbedding);
    }
    if bytes.len() < 8 {
        return Err(Error::Truncated { expected: 8, found: bytes.len() });
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let expected = 8 + 4 * dim;
    if bytes.len() != expected {
        return Err(Error::Truncated { expected, found: bytes.len() });
    }
    if dim == 0 {
        return Err(Error::InvalidInput("embedding dimension must be at least 1".into()));
    }
    Ok(bytes[8..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
}

pub fn write_embedding(path: &Path, vector: &[f32]) -> Result<()> {
    std::fs::write(path, encode_embedding(vector)?).map_err(|e| Error::io(path, e))
}

pub fn read_embedding(path: &Path) -> Result<Vec<f32>> {
    decode_embedding(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

fn embedding_filename(crop_filename: &str) -> String {
    let stem = crop_filename.rsplit_once('.').map_or(crop_filename, |(s, _)| s);
    format!("{stem}.{EMBEDDING_EXTENSION}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreRow {
    pub crop_filename: String,
    pub embedding_filename: String,
    pub dim: usize,
    #[serde(default)]
    pub label: Option<String>,
}

/// A directory of `EMB1` files plus `manifest.jsonl`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    pub dir: PathBuf,
    pub rows: Vec<StoreRow>,
}

impl EmbeddingStore {
    pub fn open(dir: &Path) -> Result<Self> {
        let rows: Vec<StoreRow> = read_jsonl(&dir.join(STORE_MANIFEST))?;
        let store = EmbeddingStore { dir: dir.to_path_buf(), rows };
        store.check_rows()?;
        Ok(store)
    }

    pub fn dim(&self) -> Option<usize> {
        self.rows.first().map(|r| r.dim)
    }

    fn check_rows(&self) -> Result<()> {
        let mut files = BTreeSet::new();
        for r in &self.rows {
            if Some(r.dim) != self.dim() {
                return Err(Error::StoreInconsistent(format!(
                    "{} has dim {}, store dim is {}",
                    r.crop_filename,
                    r.dim,
                    self.dim().unwrap_or(0)
                )));
            }
            if !files.insert(&r.embedding_filename) {
                return Err(Error::StoreInconsistent(format!("{} listed twice", r.embedding_filename)));
            }
        }
        Ok(())
    }

    pub fn read_row(&self, row: &StoreRow) -> Result<Vec<f32>> {
        let v = read_embedding(&self.dir.join(&row.embedding_filename))?;
        if v.len() != row.dim {
            return Err(Error::StoreInconsistent(format!(
                "{} holds {} values, manifest says {}",
                row.embedding_filename,
                v.len(),
                row.dim
            )));
        }
        Ok(v)
    }

    pub fn load_all(&self) -> Result<Vec<(StoreRow, Vec<f32>)>> {
        self.rows.par_iter().map(|r| Ok((r.clone(), self.read_row(r)?))).collect()
    }

    /// Writes every record and the manifest. Labels are matched by position.
    pub fn create(dir: &Path, records: &[EmbeddingRecord], labels: &[Option<String>]) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut rows = Vec::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            let name = embedding_filename(&rec.crop_filename);
            write_embedding(&dir.join(&name), &rec.vector)?;
            rows.push(StoreRow {
                crop_filename: rec.crop_filename.clone(),
                embedding_filename: name,
                dim: rec.dim(),
                label: labels.get(i).cloned().flatten(),
            });
        }
        let store = EmbeddingStore { dir: dir.to_path_buf(), rows };
        store.check_rows()?;
        write_jsonl(&dir.join(STORE_MANIFEST), &store.rows)?;
        Ok(store)
    }
}

/// Runs the toy embedder over the crops in `crop_dir`.
pub fn embed_crops(crop_dir: &Path, crops: &[CropRecord], out_dir: &Path) -> Result<EmbeddingStore> {
    let records: Vec<EmbeddingRecord> = crops
        .par_iter()
        .map(|c| {
            let path = crop_dir.join(&c.filename);
            let img = image::open(&path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
            let v = toy_embedder(&img.to_rgb8())?;
            Ok(EmbeddingRecord { crop_filename: c.filename.clone(), vector: v.into_iter().map(|x| x as f32).collect() })
        })
        .collect::<Result<_>>()?;
    let labels: Vec<Option<String>> = crops.iter().map(|c| c.behavior_label.clone()).collect();
    EmbeddingStore::create(out_dir, &records, &labels)
}

/// Runs an external embedder. The template gets `{manifest}` (the crop
/// manifest), `{out_dir}` and `{dim}`, and must write one `<crop stem>.emb`
/// per crop into `{out_dir}`.
pub fn run_external_embedder(
    cmd_template: &str,
    crop_manifest: &Path,
    crops: &[CropRecord],
    out_dir: &Path,
    dim: usize,
) -> Result<EmbeddingStore> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let dim_s = dim.to_string();
    command::run(
        cmd_template,
        &[("manifest", &crop_manifest.to_string_lossy()), ("out_dir", &out_dir.to_string_lossy()), ("dim", &dim_s)],
    )
    .map_err(|f| Error::StoreInconsistent(format!("embedder failed: {f}")))?;
    let missing: Vec<String> =
        crops.iter().filter(|c| !out_dir.join(embedding_filename(&c.filename)).is_file()).map(|c| c.filename.clone()).collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteStore(missing));
    }
    let mut rows = Vec::with_capacity(crops.len());
    for c in crops {
        let name = embedding_filename(&c.filename);
        let v = read_embedding(&out_dir.join(&name))?;
        if v.len() != dim {
            return Err(Error::StoreInconsistent(format!("{name} has dim {}, expected {dim}", v.len())));
        }
        rows.push(StoreRow { crop_filename: c.filename.clone(), embedding_filename: name, dim, label: c.behavior_label.clone() });
    }
    write_jsonl(&out_dir.join(STORE_MANIFEST), &rows)?;
    Ok(EmbeddingStore { dir: out_dir.to_path_buf(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_layout() {
        let bytes = encode_embedding(&[1.0, -2.5]).unwrap();
        assert_eq!(bytes.len(), 16);
        assert_eq!(&bytes[..4], b"EMB1");
        assert_eq!(&bytes[4..8], &[2, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &1.0f32.to_le_bytes());
        assert_eq!(decode_embedding(&bytes).unwrap(), vec![1.0, -2.5]);
    }

    #[test]
    fn rejects_foreign_and_truncated() {
        let mut bytes = encode_embedding(&[1.0, 2.0]).unwrap();
        assert!(matches!(decode_embedding(&bytes[..13]), Err(Error::Truncated { expected: 16, found: 13 })));
        bytes[3] = b'2';
        assert!(matches!(decode_embedding(&bytes), Err(Error::NotAnEmbedding)));
        assert!(matches!(decode_embedding(b"EM"), Err(Error::NotAnEmbedding)));
    }

    #[test]
    fn store_rejects_mixed_dims() {
        let dir = std::env::temp_dir().join(format!("herdpipe-store-{}", std::process::id()));
        let recs = vec![
            EmbeddingRecord { crop_filename: "0000001_a.jpg".into(), vector: vec![1.0; 4] },
            EmbeddingRecord { crop_filename: "0000001_b.jpg".into(), vector: vec![1.0; 5] },
        ];
        assert!(matches!(EmbeddingStore::create(&dir, &recs, &[]), Err(Error::StoreInconsistent(_))));
        let _ = std::fs::remove_dir_all(&dir);
    }
}
