//! `BSCP` checkpoint files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "BSCP" | u32 version | u32 meta_len | meta_len bytes of JSON
//! repeated until EOF:
//!   u32 name_len | name (UTF-8) | u32 rank | rank × u32 dims | f32 data
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layers::LayerSpec;
use super::params::Params;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"BSCP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cnn,
    Lrcn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub kind: ModelKind,
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    /// LSTM hidden size; `None` for frame classifiers.
    pub hidden_size: Option<usize>,
    pub epoch: usize,
    pub seed: u64,
    /// Layer stack of the convolutional classifier.
    pub architecture: Vec<LayerSpec>,
    /// Number of leading layers that form the feature extractor.
    pub feature_layers: usize,
    pub tensor_count: usize,
    /// Effective configuration that produced the model.
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub meta: CheckpointMeta,
    pub tensors: BTreeMap<String, Tensor>,
}

impl ModelCheckpoint {
    /// Builds a checkpoint, rounding every value to single precision.
    pub fn new(mut meta: CheckpointMeta, params: &Params) -> Self {
        let tensors: BTreeMap<String, Tensor> = params
            .iter()
            .map(|(n, t)| (n.to_string(), t.map(|v| v as f32 as f64)))
            .collect();
        meta.tensor_count = tensors.len();
        Self {
            format_version: CHECKPOINT_VERSION,
            meta,
            tensors,
        }
    }

    pub fn params(&self) -> Params {
        self.tensors.clone().into()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        let meta = serde_json::to_vec(&self.meta)?;
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "checkpoint");
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(r.error(0, "bad magic, expected BSCP"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(r.error(4, format!("unsupported version {version}")));
        }
        let meta_len = r.u32()? as usize;
        let meta_at = r.pos;
        let meta: CheckpointMeta =
            serde_json::from_slice(r.take(meta_len)?).map_err(|e| r.error(meta_at, format!("metadata: {e}")))?;
        let mut tensors = BTreeMap::new();
        while !r.at_end() {
            let at = r.pos;
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| r.error(at, "tensor name is not UTF-8"))?
                .to_string();
            let rank = r.u32()? as usize;
            if rank == 0 || rank > 8 {
                return Err(r.error(at, format!("tensor `{name}` has rank {rank}")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(4).ok_or_else(|| r.error(at, "size overflow"))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| r.error(at, e.to_string()))?;
            if tensors.insert(name.clone(), t).is_some() {
                return Err(r.error(at, format!("duplicate tensor `{name}`")));
            }
        }
        if tensors.len() != meta.tensor_count {
            return Err(r.error(
                r.pos,
                format!("expected {} tensors, found {}", meta.tensor_count, tensors.len()),
            ));
        }
        Ok(Self {
            format_version: version,
            meta,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// SHA-256 of the serialized checkpoint, hex encoded.
    pub fn checksum(&self) -> Result<String> {
        Ok(sha256_hex(&self.to_bytes()?))
    }

    /// SHA-256 over the named tensors only (name, shape, f32 bytes).
    pub fn tensor_digest<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Result<String> {
        let mut h = Sha256::new();
        for name in names {
            let t = self
                .tensors
                .get(name)
                .ok_or_else(|| Error::MissingParameter(name.to_string()))?;
            h.update(name.as_bytes());
            for &d in t.shape() {
                h.update((d as u32).to_le_bytes());
            }
            for &v in t.data() {
                h.update((v as f32).to_le_bytes());
            }
        }
        Ok(hex(&h.finalize()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Little-endian cursor that reports failures with their byte offset.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pub pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    pub fn error(&self, offset: usize, detail: impl Into<String>) -> Error {
        Error::Format {
            what: self.what,
            offset: offset as u64,
            detail: detail.into(),
        }
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.error(
                self.pos,
                format!("truncated: need {n} bytes, {} left", self.remaining()),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ModelCheckpoint {
        let mut p = Params::new();
        p.insert("cnn.0.weight", Tensor::new(vec![2, 1, 1, 1], vec![0.1, -2.5]).unwrap());
        p.insert("cnn.0.bias", Tensor::vector(vec![1.0 / 3.0, 0.0]));
        let meta = CheckpointMeta {
            kind: ModelKind::Cnn,
            input_channels: 1,
            input_height: 4,
            input_width: 4,
            hidden_size: None,
            epoch: 3,
            seed: 42,
            architecture: vec![LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: 2,
                kernel: 1,
                stride: 1,
                padding: super::super::layers::Padding::Same,
            }],
            feature_layers: 1,
            tensor_count: 0,
            config: serde_json::json!({"lr": 0.01}),
        };
        ModelCheckpoint::new(meta, &p)
    }

    #[test]
    fn round_trip_is_exact_after_f32_rounding() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"BSCP");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        let back = ModelCheckpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.tensors["cnn.0.bias"].data()[0], (1.0f64 / 3.0) as f32 as f64);
    }

    #[test]
    fn corruption_reports_offset() {
        let bytes = sample().to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            ModelCheckpoint::from_bytes(&bad),
            Err(Error::Format { offset: 0, .. })
        ));
        let truncated = &bytes[..bytes.len() - 3];
        match ModelCheckpoint::from_bytes(truncated) {
            Err(Error::Format { offset, .. }) => assert!(offset > 12),
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
