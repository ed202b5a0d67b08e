//! Embedding (`RVEC1`) and feature-map (`RMAP1`) files.
//!
//! Both are a 5-byte ASCII magic, little-endian `u32` shape fields, then
//! little-endian `f32` payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{EmbeddingVector, FeatureMap4D};

pub const RVEC_MAGIC: &[u8; 5] = b"RVEC1";
pub const RMAP_MAGIC: &[u8; 5] = b"RMAP1";

fn file_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn read_u32s(bytes: &[u8], count: usize) -> Option<Vec<u32>> {
    let raw = bytes.get(5..5 + 4 * count)?;
    Some(
        raw.chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    )
}

fn read_payload(path: &Path, bytes: &[u8], start: usize, count: usize) -> Result<Vec<f64>> {
    let needed = count * 4;
    let available = bytes.len().saturating_sub(start);
    if available != needed {
        return Err(Error::Dimension(format!(
            "{}: header declares {count} values ({needed} bytes), payload has {available} bytes",
            path.display()
        )));
    }
    Ok(bytes[start..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn check_magic(path: &Path, bytes: &[u8], magic: &[u8; 5]) -> Result<()> {
    if bytes.get(..5) != Some(&magic[..]) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("missing {} magic", String::from_utf8_lossy(magic)),
        });
    }
    Ok(())
}

pub fn decode_embedding(id: &str, path: &Path, bytes: &[u8]) -> Result<EmbeddingVector> {
    check_magic(path, bytes, RVEC_MAGIC)?;
    let dim = read_u32s(bytes, 1)
        .ok_or_else(|| Error::Dimension(format!("{}: truncated header", path.display())))?[0]
        as usize;
    let values = read_payload(path, bytes, 9, dim)?;
    EmbeddingVector::new(id, values)
}

pub fn load_embedding(path: impl AsRef<Path>) -> Result<EmbeddingVector> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_embedding(&file_id(path), path, &bytes)
}

/// Values are stored as `f32`; anything not representable is rounded.
pub fn encode_embedding(v: &EmbeddingVector) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + 4 * v.dim());
    out.extend_from_slice(RVEC_MAGIC);
    out.extend_from_slice(&(v.dim() as u32).to_le_bytes());
    for &x in v.values() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    out
}

pub fn write_embedding(v: &EmbeddingVector, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_embedding(v)).map_err(|e| Error::io(path, e))
}

pub fn decode_feature_map(id: &str, path: &Path, bytes: &[u8]) -> Result<FeatureMap4D> {
    check_magic(path, bytes, RMAP_MAGIC)?;
    let shape = read_u32s(bytes, 4)
        .ok_or_else(|| Error::Dimension(format!("{}: truncated header", path.display())))?;
    let [c, d, h, w] = [shape[0], shape[1], shape[2], shape[3]].map(|x| x as usize);
    let values = read_payload(path, bytes, 21, c * d * h * w)?;
    FeatureMap4D::new(id, c, [d, h, w], values)
}

pub fn load_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap4D> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature_map(&file_id(path), path, &bytes)
}

pub fn encode_feature_map(f: &FeatureMap4D) -> Vec<u8> {
    let mut out = Vec::with_capacity(21 + 4 * f.values().len());
    out.extend_from_slice(RMAP_MAGIC);
    for x in [f.channels(), f.dims()[0], f.dims()[1], f.dims()[2]] {
        out.extend_from_slice(&(x as u32).to_le_bytes());
    }
    for &x in f.values() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    out
}

pub fn write_feature_map(f: &FeatureMap4D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_feature_map(f)).map_err(|e| Error::io(path, e))
}
