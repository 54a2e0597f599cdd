//! Flat binary container for trained parameters.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic  "APNN"
//! u32    format version (1)
//! u32    layer count (body layers plus the head)
//! per layer:
//!   u8   kind tag (0 identity, 1 conv, 2 maxpool, 3 dense, 4 dropout,
//!        5 residual, 6 flatten, 7 head)
//!   u32  array count
//!   per array:
//!     u32   number of dims, then one u32 per dim
//!     f64   values, row-major
//! ```

use std::io::{Read, Write};

use super::layers::ParamArray;
use super::network::Network;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"APNN";
pub const FORMAT_VERSION: u32 = 1;
const HEAD_TAG: u8 = 7;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerBlob {
    pub tag: u8,
    pub arrays: Vec<ParamArray>,
}

/// Parameter blobs for a network in container order.
pub fn network_blobs(net: &Network) -> Vec<LayerBlob> {
    let mut blobs: Vec<LayerBlob> = net
        .layers
        .iter()
        .map(|l| LayerBlob {
            tag: l.layer.tag(),
            arrays: l.layer.params().into_iter().cloned().collect(),
        })
        .collect();
    blobs.push(LayerBlob {
        tag: HEAD_TAG,
        arrays: vec![net.head.weight.clone(), net.head.bias.clone()],
    });
    blobs
}

pub fn write_blobs<W: Write>(mut out: W, blobs: &[LayerBlob]) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(blobs.len() as u32).to_le_bytes())?;
    for blob in blobs {
        out.write_all(&[blob.tag])?;
        out.write_all(&(blob.arrays.len() as u32).to_le_bytes())?;
        for a in &blob.arrays {
            out.write_all(&(a.shape.len() as u32).to_le_bytes())?;
            for &d in &a.shape {
                out.write_all(&(d as u32).to_le_bytes())?;
            }
            for v in &a.values {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    out.flush()
}

pub fn write_network<W: Write>(out: W, net: &Network) -> std::io::Result<()> {
    write_blobs(out, &network_blobs(net))
}

fn take<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Evaluation(format!("truncated parameter file: {e}")))?;
    Ok(buf)
}

fn take_u32(input: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(take::<4>(input)?))
}

pub fn read_blobs<R: Read>(mut input: R) -> Result<Vec<LayerBlob>> {
    let magic = take::<4>(&mut input)?;
    if &magic != MAGIC {
        return Err(Error::Evaluation(format!(
            "not a parameter file: magic {magic:?}"
        )));
    }
    let version = take_u32(&mut input)?;
    if version != FORMAT_VERSION {
        return Err(Error::Evaluation(format!(
            "unsupported parameter file version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let layers = take_u32(&mut input)?;
    let mut blobs = Vec::new();
    for _ in 0..layers {
        let tag = take::<1>(&mut input)?[0];
        let count = take_u32(&mut input)?;
        let mut arrays = Vec::new();
        for _ in 0..count {
            let ndims = take_u32(&mut input)?;
            let mut shape = Vec::new();
            for _ in 0..ndims {
                shape.push(take_u32(&mut input)? as usize);
            }
            let len: usize = shape.iter().product();
            let mut values = Vec::with_capacity(len);
            for _ in 0..len {
                values.push(f64::from_le_bytes(take::<8>(&mut input)?));
            }
            arrays.push(ParamArray { shape, values });
        }
        blobs.push(LayerBlob { tag, arrays });
    }
    Ok(blobs)
}

/// Loads parameters into a network of identical structure.
pub fn load_into<R: Read>(input: R, net: &mut Network) -> Result<()> {
    let blobs = read_blobs(input)?;
    let expected = network_blobs(net);
    let same_layout = blobs.len() == expected.len()
        && blobs.iter().zip(&expected).all(|(a, b)| {
            a.tag == b.tag
                && a.arrays.len() == b.arrays.len()
                && a.arrays
                    .iter()
                    .zip(&b.arrays)
                    .all(|(x, y)| x.shape == y.shape)
        });
    if !same_layout {
        return Err(Error::Shape(
            "parameter file does not match the network structure".into(),
        ));
    }
    let values: Vec<Vec<f64>> = blobs
        .into_iter()
        .flat_map(|b| b.arrays.into_iter().map(|a| a.values))
        .collect();
    net.restore(&values);
    Ok(())
}
