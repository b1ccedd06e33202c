//! Binary model checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes   b"SSUMCKPT"
//! version    u32
//! hdr_len    u64
//! header     hdr_len bytes of JSON {format_version, dim, labels, seed, config}
//! weights    labels*dim f64, row-major (one row per label)
//! biases     labels f64
//! ```

use serde::{Deserialize, Serialize};

use super::model::{LabelSpace, SoftmaxModel};
use super::train::TrainConfig;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SSUMCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub dim: usize,
    pub labels: Vec<String>,
    pub seed: u64,
    pub config: TrainConfig,
}

pub fn write_checkpoint(model: &SoftmaxModel, config: &TrainConfig) -> Vec<u8> {
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        dim: model.dim(),
        labels: model.labels.names().to_vec(),
        seed: model.rng_seed(),
        config: *config,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(20 + json.len() + 8 * (model.weights.len() + model.biases.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in model.weights().iter().chain(model.biases()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<(SoftmaxModel, CheckpointHeader)> {
    let mut r = Reader { buf: bytes };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let hdr_len = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
    let hdr_len = usize::try_from(hdr_len).map_err(|_| Error::Checkpoint("header too large".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(r.take(hdr_len)?)?;
    let labels = LabelSpace::new(header.labels.iter().cloned())?;
    let weights = r.f64s(labels.len() * header.dim)?;
    let biases = r.f64s(labels.len())?;
    if !r.buf.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", r.buf.len())));
    }
    let model = SoftmaxModel::from_parts(labels, header.dim, weights, biases, header.seed)?;
    Ok((model, header))
}
