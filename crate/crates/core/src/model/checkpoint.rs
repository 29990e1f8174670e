//! `TCNN` network checkpoints and JSON pairs-model files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{NetSpec, TinyCnn};
use super::pairs::PairsMlp;
use super::train::EpochStats;
use super::ModelKind;
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub kind: ModelKind,
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub val_accuracy: f64,
    pub init: String,
    pub bn_eps: f64,
    pub bn_momentum: f64,
    #[serde(default)]
    pub standardize: Vec<usize>,
    #[serde(default)]
    pub history: Vec<EpochStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: TinyCnn<f32>,
    pub meta: CheckpointMeta,
}

pub const INIT_SCHEME: &str = "he-uniform conv, variance-1/fan-in uniform head, zero head bias";

impl Checkpoint {
    pub fn write_to(&self, w: impl Write) -> Result<()> {
        let spec = self.net.spec();
        let mut w = Writer::new(w);
        w.magic(b"TCNN")?;
        w.u32(FORMAT_VERSION)?;
        w.u32(spec.input_channels as u32)?;
        w.u32(spec.widths.len() as u32)?;
        for (width, stride) in spec.widths.iter().zip(&spec.strides) {
            w.u32(*width as u32)?;
            w.u32(*stride as u32)?;
        }
        w.u32(self.net.params.len() as u32)?;
        w.f32s(&self.net.params)?;
        w.u32(self.net.buffers.len() as u32)?;
        w.f32s(&self.net.buffers)?;
        w.bytes(&serde_json::to_vec(&self.meta).expect("metadata serializes"))?;
        w.finish()?;
        Ok(())
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new("TCNN checkpoint", buf);
        r.magic(b"TCNN")?;
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(r.error(format!("unsupported version {version}")));
        }
        let input_channels = r.u32()? as usize;
        let blocks = r.u32()? as usize;
        if blocks > 1024 {
            return Err(r.error(format!("implausible block count {blocks}")));
        }
        let mut widths = Vec::with_capacity(blocks);
        let mut strides = Vec::with_capacity(blocks);
        for _ in 0..blocks {
            widths.push(r.u32()? as usize);
            strides.push(r.u32()? as usize);
        }
        let count_at = r.offset();
        let n_params = r.u32()? as usize;
        let params = r.f32s(n_params)?;
        let n_buffers = r.u32()? as usize;
        let buffers = r.f32s(n_buffers)?;
        let at = r.offset();
        let meta: CheckpointMeta = serde_json::from_slice(r.rest()).map_err(|e| Error::Format {
            what: "TCNN checkpoint",
            offset: at as u64,
            message: format!("bad JSON trailer: {e}"),
        })?;
        let spec = NetSpec {
            input_channels,
            widths,
            strides,
            bn_eps: meta.bn_eps,
            bn_momentum: meta.bn_momentum,
            standardize: meta.standardize.clone(),
        };
        let mut net = TinyCnn::<f32>::zeroed(spec).map_err(|e| Error::Format {
            what: "TCNN checkpoint",
            offset: 8,
            message: e.to_string(),
        })?;
        if net.params.len() != n_params || net.buffers.len() != n_buffers {
            return Err(Error::Format {
                what: "TCNN checkpoint",
                offset: count_at as u64,
                message: format!(
                    "layer table implies {} parameters and {} buffers, file has {n_params} and {n_buffers}",
                    net.params.len(),
                    net.buffers.len()
                ),
            });
        }
        net.params = params;
        net.buffers = buffers;
        Ok(Self { net, meta })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairsCheckpoint {
    pub kind: ModelKind,
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub val_accuracy: f64,
    pub history: Vec<EpochStats>,
    pub model: PairsMlp,
}

/// Either checkpoint type, detected from the file content.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Cnn(Checkpoint),
    Pairs(PairsCheckpoint),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Cnn(c) => c.meta.kind,
            TrainedModel::Pairs(p) => p.kind,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        match self {
            TrainedModel::Cnn(c) => c.save(path),
            TrainedModel::Pairs(p) => {
                let path = path.as_ref();
                let text = serde_json::to_string(p).expect("pairs model serializes");
                std::fs::write(path, text)?;
                Ok(())
            }
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let buf = std::fs::read(path)?;
        if buf.starts_with(b"TCNN") {
            return Ok(TrainedModel::Cnn(Checkpoint::from_bytes(&buf)?));
        }
        serde_json::from_slice(&buf)
            .map(TrainedModel::Pairs)
            .map_err(|e| Error::Json {
                path: path.to_path_buf(),
                source: e,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn checkpoint() -> Checkpoint {
        let spec = NetSpec {
            input_channels: 3,
            widths: vec![4, 5],
            strides: vec![2, 1],
            standardize: vec![2],
            ..NetSpec::desk(3)
        };
        Checkpoint {
            net: TinyCnn::new(spec, &mut rng::stream(9, 0)).unwrap(),
            meta: CheckpointMeta {
                kind: ModelKind::Left,
                seed: 9,
                epochs: 2,
                best_epoch: 1,
                val_accuracy: 0.75,
                init: INIT_SCHEME.into(),
                bn_eps: 1e-5,
                bn_momentum: 0.1,
                standardize: vec![2],
                history: vec![],
            },
        }
    }

    #[test]
    fn round_trip() {
        let c = checkpoint();
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        assert_eq!(Checkpoint::from_bytes(&buf).unwrap(), c);
    }

    #[test]
    fn truncated_file_names_offset() {
        let mut buf = Vec::new();
        checkpoint().write_to(&mut buf).unwrap();
        let err = Checkpoint::from_bytes(&buf[..40]).unwrap_err().to_string();
        assert!(err.contains("TCNN checkpoint") && err.contains("offset"), "{err}");
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
    }
}
