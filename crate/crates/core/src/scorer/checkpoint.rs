//! Checkpoint files: magic, a length-prefixed JSON header, then every
//! parameter block as a `u64` element count followed by little-endian `f64`s.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::Layer;
use super::{LayerSpec, ScorerModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"PRCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    input_dim: usize,
    seed: u64,
    layers: Vec<LayerSpec>,
}

pub fn write_checkpoint(m: &ScorerModel) -> Vec<u8> {
    let header = Header {
        format_version: FORMAT_VERSION,
        input_dim: m.input_dim,
        seed: m.seed,
        layers: m.specs(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for layer in &m.layers {
        for block in layer.all_blocks() {
            out.extend_from_slice(&(block.len() as u64).to_le_bytes());
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("checkpoint is truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<ScorerModel> {
    if bytes.len() < CHECKPOINT_MAGIC.len() || &bytes[..CHECKPOINT_MAGIC.len()] != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a scorer checkpoint (bad magic)".into()));
    }
    let mut cur = Cursor {
        bytes,
        pos: CHECKPOINT_MAGIC.len(),
    };
    let header_len = cur.u32()? as usize;
    let header: Header =
        serde_json::from_slice(cur.take(header_len)?).map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {} (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    let mut model = ScorerModel::from_specs(header.input_dim, &header.layers, header.seed)
        .map_err(|e| Error::Format(format!("checkpoint layer specs: {e}")))?;
    for layer in &mut model.layers {
        for block in layer.all_blocks_mut() {
            let n = cur.u64()? as usize;
            if n != block.len() {
                return Err(Error::Format(format!(
                    "parameter block holds {n} values, layer spec implies {}",
                    block.len()
                )));
            }
            let raw = cur.take(n * 8)?;
            for (dst, c) in block.iter_mut().zip(raw.chunks_exact(8)) {
                *dst = f64::from_le_bytes(c.try_into().unwrap());
            }
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after the last parameter block".into()));
    }
    if model
        .layers
        .iter()
        .any(|l| matches!(l, Layer::BatchNorm(b) if b.running_var.iter().any(|&v| !(v > 0.0))))
    {
        return Err(Error::Format("running variance must be positive".into()));
    }
    let layers = std::mem::take(&mut model.layers);
    ScorerModel::from_parts(header.input_dim, header.seed, layers)
}

pub fn save_checkpoint(m: &ScorerModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_checkpoint(m)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ScorerModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::ForwardMode;
    use ndarray::array;

    #[test]
    fn round_trip_preserves_eval_scores() {
        let mut m = ScorerModel::build(3, &[4, 2], 0.3, 17).unwrap();
        let x = array![[1.0, -2.0, 0.3], [0.0, 5.0, 1.0], [2.0, 2.0, 2.0]];
        m.forward(x.view(), ForwardMode::Train { dropout_seed: 2 }).unwrap();
        let back = read_checkpoint(&write_checkpoint(&m)).unwrap();
        assert_eq!(m.predict(x.view()).unwrap(), back.predict(x.view()).unwrap());
        assert_eq!(back.layers(), m.layers());
    }

    #[test]
    fn fresh_model_bytes_are_stable() {
        let a = write_checkpoint(&ScorerModel::build(5, &[3], 0.3, 8).unwrap());
        let b = write_checkpoint(&ScorerModel::build(5, &[3], 0.3, 8).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn bad_magic_version_and_truncation() {
        let m = ScorerModel::build(2, &[2], 0.0, 1).unwrap();
        let mut bytes = write_checkpoint(&m);
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(matches!(read_checkpoint(&wrong), Err(Error::Format(_))));
        assert!(matches!(
            read_checkpoint(&bytes[..bytes.len() - 3]),
            Err(Error::Format(_))
        ));

        let header_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let header = String::from_utf8(bytes[10..10 + header_len].to_vec()).unwrap();
        let bumped = header.replace("\"format_version\":1", "\"format_version\":9");
        assert_eq!(bumped.len(), header.len());
        bytes[10..10 + header_len].copy_from_slice(bumped.as_bytes());
        let err = read_checkpoint(&bytes).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }
}
