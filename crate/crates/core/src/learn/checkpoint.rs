//! Binary model checkpoints.
//!
//! Layout, little-endian: `MDL1`, kind byte (0 MLP, 1 BiLSTM), input dim,
//! class count, architecture, class names, training config as JSON, then the
//! parameter count and the parameters as f64.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3};

use super::lstm::{BiLstm, BiLstmConfig};
use super::mlp::{Mlp, MlpConfig};
use super::model::{Classifier, ModelKind};
use super::train::{predict, TrainConfig};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MDL1";

#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Mlp(Mlp),
    Bilstm(BiLstm),
}

impl AnyModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Mlp(_) => ModelKind::Mlp,
            AnyModel::Bilstm(_) => ModelKind::Bilstm,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            AnyModel::Mlp(m) => m.input_dim,
            AnyModel::Bilstm(m) => m.input_dim,
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            AnyModel::Mlp(m) => m.params(),
            AnyModel::Bilstm(m) => m.params(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: AnyModel,
    pub class_names: Vec<String>,
    pub train_config: TrainConfig,
}

impl Checkpoint {
    pub fn predict_frames(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        match &self.model {
            AnyModel::Mlp(m) => predict(m, x),
            AnyModel::Bilstm(_) => Err(Error::InvalidInput("BiLSTM checkpoints classify windows, not frames".into())),
        }
    }

    pub fn predict_windows(&self, x: &Array3<f64>) -> Result<Vec<usize>> {
        match &self.model {
            AnyModel::Bilstm(m) => predict(m, x),
            AnyModel::Mlp(_) => Err(Error::InvalidInput("MLP checkpoints classify frames, not windows".into())),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        let u32s = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
        match &self.model {
            AnyModel::Mlp(m) => {
                out.push(0);
                u32s(&mut out, m.input_dim);
                u32s(&mut out, m.num_classes);
                u32s(&mut out, m.config.hidden[0]);
                u32s(&mut out, m.config.hidden[1]);
                out.extend_from_slice(&m.config.dropout.to_le_bytes());
            }
            AnyModel::Bilstm(m) => {
                out.push(1);
                u32s(&mut out, m.input_dim);
                u32s(&mut out, m.num_classes);
                u32s(&mut out, m.config.hidden);
                u32s(&mut out, m.config.head);
                out.extend_from_slice(&m.config.dropout.to_le_bytes());
            }
        }
        u32s(&mut out, self.class_names.len());
        for name in &self.class_names {
            u32s(&mut out, name.len());
            out.extend_from_slice(name.as_bytes());
        }
        let cfg = serde_json::to_vec(&self.train_config).expect("config serializes");
        u32s(&mut out, cfg.len());
        out.extend_from_slice(&cfg);
        let params = self.model.params();
        out.extend_from_slice(&(params.len() as u64).to_le_bytes());
        for p in params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::BadCheckpoint("missing MDL1 magic".into()));
        }
        let kind = r.take(1)?[0];
        let input_dim = r.u32()?;
        let num_classes = r.u32()?;
        let a = r.u32()?;
        let b = r.u32()?;
        let dropout = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let n_names = r.u32()?;
        if n_names != num_classes {
            return Err(Error::BadCheckpoint(format!("{n_names} class names for {num_classes} classes")));
        }
        let mut class_names = Vec::with_capacity(n_names);
        for _ in 0..n_names {
            let len = r.u32()?;
            let s = std::str::from_utf8(r.take(len)?).map_err(|e| Error::BadCheckpoint(e.to_string()))?;
            class_names.push(s.to_string());
        }
        let cfg_len = r.u32()?;
        let train_config =
            serde_json::from_slice(r.take(cfg_len)?).map_err(|e| Error::BadCheckpoint(format!("training config: {e}")))?;
        let n = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")) as usize;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::BadCheckpoint("parameter count overflow".into()))?)?;
        let params: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        if r.pos != bytes.len() {
            return Err(Error::BadCheckpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::BadCheckpoint("non-finite parameter".into()));
        }
        let bad = |e: Error| Error::BadCheckpoint(e.to_string());
        let model = match kind {
            0 => AnyModel::Mlp(
                Mlp::from_params(input_dim, num_classes, MlpConfig { hidden: [a, b], dropout }, params).map_err(bad)?,
            ),
            1 => AnyModel::Bilstm(
                BiLstm::from_params(input_dim, num_classes, BiLstmConfig { hidden: a, head: b, dropout }, params).map_err(bad)?,
            ),
            k => return Err(Error::BadCheckpoint(format!("unknown model kind byte {k}"))),
        };
        Ok(Checkpoint { model, class_names, train_config })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::BadCheckpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
}
