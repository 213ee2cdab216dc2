//! Model checkpoint file:
//!
//! ```text
//! magic    8 bytes   "AUGBCNN\0"
//! version  u32 LE    1
//! hlen     u32 LE    length of the JSON header
//! header   hlen      {"input_shape":[c,h,w],"layers":[LayerSpec...]}
//! blobs              per trainable layer: weights then bias, f64 LE
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{CnnModel, LayerSpec};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"AUGBCNN\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    input_shape: [usize; 3],
    layers: Vec<LayerSpec>,
}

pub fn encode_checkpoint(model: &CnnModel) -> Vec<u8> {
    let header = serde_json::to_vec(&Header { input_shape: model.input_shape(), layers: model.specs() }).expect("header serializes");
    let mut out = Vec::with_capacity(16 + header.len() + 8 * model.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for p in model.params() {
        for v in p.weights.data().iter().chain(p.bias.data()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<CnnModel> {
    let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedFormat(format!("checkpoint version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let header_bytes = bytes.get(16..16 + hlen).ok_or_else(|| corrupt("truncated header"))?;
    let header: Header = serde_json::from_slice(header_bytes).map_err(|e| corrupt(&e.to_string()))?;
    let mut model = CnnModel::zeroed(header.input_shape, &header.layers)?;
    let mut blob = &bytes[16 + hlen..];
    for p in model.params_mut() {
        for dst in [p.weights.data_mut(), p.bias.data_mut()] {
            let n = dst.len();
            if blob.len() < 8 * n {
                return Err(corrupt("truncated parameters"));
            }
            for (d, c) in dst.iter_mut().zip(blob[..8 * n].chunks_exact(8)) {
                *d = f64::from_le_bytes(c.try_into().unwrap());
            }
            blob = &blob[8 * n..];
        }
    }
    if !blob.is_empty() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &CnnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<CnnModel> {
    let path = path.as_ref();
    decode_checkpoint(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
