//! Reader and writer for unsigned-byte IDX files (the MNIST container).
//!
//! Layout: two zero bytes, a type byte (`0x08` for `u8`), a dimension count
//! byte, one big-endian `u32` per dimension, then the raw bytes row-major.

use std::fs;
use std::path::Path;

use super::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::TensorShape;

const UBYTE: u8 = 0x08;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxArray> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::Dataset("not an IDX file: bad magic".into()));
    }
    if bytes[2] != UBYTE {
        return Err(Error::Dataset(format!(
            "unsupported IDX element type 0x{:02x} (only unsigned bytes)",
            bytes[2]
        )));
    }
    let ndims = bytes[3] as usize;
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(Error::Dataset("truncated IDX header".into()));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let len: usize = dims.iter().product();
    if bytes.len() != header + len {
        return Err(Error::Dataset(format!(
            "IDX payload holds {} bytes, dims {dims:?} need {len}",
            bytes.len() - header
        )));
    }
    Ok(IdxArray {
        dims,
        data: bytes[header..].to_vec(),
    })
}

pub fn to_idx_bytes(array: &IdxArray) -> Vec<u8> {
    let mut out = vec![0, 0, UBYTE, array.dims.len() as u8];
    for &d in &array.dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&array.data);
    out
}

pub fn read_idx(path: &Path) -> Result<IdxArray> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx(&bytes)
}

pub fn write_idx(path: &Path, array: &IdxArray) -> Result<()> {
    fs::write(path, to_idx_bytes(array)).map_err(|e| Error::io(path, e))
}

/// Images scaled to `[0, 1]` with shape `(rows, cols, 1)`, keeping at most
/// `limit` samples. The class count is one more than the largest label.
pub fn load_idx_dataset(images: &Path, labels: &Path, limit: Option<usize>) -> Result<Dataset> {
    let img = read_idx(images)?;
    let lab = read_idx(labels)?;
    let (count, rows, cols) = match img.dims[..] {
        [n, r, c] if r > 0 && c > 0 => (n, r, c),
        _ => {
            return Err(Error::Dataset(format!(
                "image file must be 3-dimensional, got dims {:?}",
                img.dims
            )))
        }
    };
    if lab.dims != [count] {
        return Err(Error::Dataset(format!(
            "label dims {:?} do not match {count} images",
            lab.dims
        )));
    }
    let keep = limit.map_or(count, |l| l.min(count));
    let features = img.data[..keep * rows * cols]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    let labels: Vec<usize> = lab.data[..keep].iter().map(|&b| b as usize).collect();
    let num_classes = labels.iter().max().map_or(0, |m| m + 1).max(2);
    Dataset::new(
        "idx",
        features,
        labels,
        TensorShape::spatial(rows, cols, 1),
        num_classes,
    )
}
