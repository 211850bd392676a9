//! Tensor files for logits and dense maps.
//!
//! Layout: magic "UARS" (4 bytes), format version u32 = 1, ndim u32 (2 or
//! 3), dims as u32 each in row-major order ([H, W] or [H, W, C]), then
//! H*W*C 32-bit little-endian floats. Two-dimensional files are read as a
//! single channel; save writes the canonical form (2 dims when C = 1).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::DenseMap;

pub const TENSOR_MAGIC: [u8; 4] = *b"UARS";
pub const TENSOR_VERSION: u32 = 1;

pub fn load_tensor(path: &Path) -> Result<DenseMap> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_tensor(&bytes)
}

pub(crate) fn decode_tensor(bytes: &[u8]) -> Result<DenseMap> {
    let take_u32 = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or(Error::TensorTruncated {
                expected: at + 4,
                got: bytes.len(),
            })
    };
    let magic: [u8; 4] = bytes
        .get(..4)
        .map(|b| b.try_into().unwrap())
        .ok_or(Error::TensorTruncated {
            expected: 4,
            got: bytes.len(),
        })?;
    if magic != TENSOR_MAGIC {
        return Err(Error::TensorBadMagic { found: magic });
    }
    let version = take_u32(4)?;
    if version != TENSOR_VERSION {
        return Err(Error::TensorBadVersion { found: version });
    }
    let ndim = take_u32(8)? as usize;
    if !(2..=3).contains(&ndim) {
        return Err(Error::TensorBadDims {
            what: format!("ndim must be 2 or 3, got {ndim}"),
        });
    }
    let mut dims = [1usize; 3];
    for (i, d) in dims.iter_mut().take(ndim).enumerate() {
        *d = take_u32(12 + 4 * i)? as usize;
        if *d == 0 {
            return Err(Error::TensorBadDims {
                what: format!("dimension {i} is zero"),
            });
        }
    }
    let (height, width, channels) = (dims[0], dims[1], dims[2]);
    let header = 12 + 4 * ndim;
    let payload = &bytes[header..];
    let expected = height * width * channels;
    let got = payload.len() / 4;
    if payload.len() % 4 != 0 || got < expected {
        return Err(Error::TensorTruncated { expected, got });
    }
    if got > expected {
        return Err(Error::TensorBadDims {
            what: format!("trailing data: payload holds {got} values, dims declare {expected}"),
        });
    }
    let mut data = Vec::with_capacity(expected);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: "tensor payload",
                index: i,
            });
        }
        data.push(v);
    }
    DenseMap::from_vec(width, height, channels, data)
}

pub fn save_tensor(map: &DenseMap, path: &Path) -> Result<()> {
    let bytes = encode_tensor(map);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub(crate) fn encode_tensor(map: &DenseMap) -> Vec<u8> {
    let ndim: u32 = if map.channels == 1 { 2 } else { 3 };
    let mut out = Vec::with_capacity(12 + 4 * ndim as usize + map.data.len() * 4);
    out.extend_from_slice(&TENSOR_MAGIC);
    out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    out.extend_from_slice(&ndim.to_le_bytes());
    out.extend_from_slice(&(map.height as u32).to_le_bytes());
    out.extend_from_slice(&(map.width as u32).to_le_bytes());
    if ndim == 3 {
        out.extend_from_slice(&(map.channels as u32).to_le_bytes());
    }
    for &v in &map.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}
