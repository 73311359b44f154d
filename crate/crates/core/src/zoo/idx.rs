use std::fs;
use std::path::Path;

use crate::numerics::Tensor;
use crate::{Error, Result};

const MAGIC_IMAGES: u32 = 0x0000_0803;
const MAGIC_LABELS: u32 = 0x0000_0801;

/// Parsed contents of a big-endian IDX file.
#[derive(Debug, Clone)]
pub enum IdxContent {
    /// `[n, 1, rows, cols]`, pixel bytes scaled into [0, 1].
    Images(Tensor),
    Labels(Vec<usize>),
}

/// Reads an IDX file: magic 2051 for u8 image tensors, 2049 for label
/// vectors, dimension sizes, then the raw payload.
pub fn load_idx(path: &Path) -> Result<IdxContent> {
    let bytes = fs::read(path).map_err(|_| Error::TruncatedPayload {
        expected: 4,
        got: 0,
    })?;
    parse_idx(&bytes)
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxContent> {
    if bytes.len() < 4 {
        return Err(Error::TruncatedPayload {
            expected: 4,
            got: bytes.len(),
        });
    }
    let magic = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
    match magic {
        MAGIC_IMAGES => {
            let dims = read_dims(bytes, 3)?;
            let (n, rows, cols) = (dims[0], dims[1], dims[2]);
            let header = 4 + 3 * 4;
            let expected = header + n * rows * cols;
            if bytes.len() < expected {
                return Err(Error::TruncatedPayload {
                    expected,
                    got: bytes.len(),
                });
            }
            let data: Vec<f64> = bytes[header..expected]
                .iter()
                .map(|&b| b as f64 / 255.0)
                .collect();
            Ok(IdxContent::Images(Tensor::new(
                vec![n, 1, rows, cols],
                data,
            )?))
        }
        MAGIC_LABELS => {
            let dims = read_dims(bytes, 1)?;
            let n = dims[0];
            let header = 4 + 4;
            let expected = header + n;
            if bytes.len() < expected {
                return Err(Error::TruncatedPayload {
                    expected,
                    got: bytes.len(),
                });
            }
            Ok(IdxContent::Labels(
                bytes[header..expected].iter().map(|&b| b as usize).collect(),
            ))
        }
        other => Err(Error::UnknownMagic(other)),
    }
}

fn read_dims(bytes: &[u8], count: usize) -> Result<Vec<usize>> {
    let need = 4 + count * 4;
    if bytes.len() < need {
        return Err(Error::TruncatedPayload {
            expected: need,
            got: bytes.len(),
        });
    }
    Ok((0..count)
        .map(|i| {
            u32::from_be_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize
        })
        .collect())
}

/// Serializes images (`[n, 1, rows, cols]`, values in [0, 1]) into IDX bytes.
pub fn encode_idx_images(images: &Tensor) -> Vec<u8> {
    let s = images.shape();
    let (n, rows, cols) = (s[0], s[2], s[3]);
    let mut out = Vec::with_capacity(16 + n * rows * cols);
    out.extend_from_slice(&MAGIC_IMAGES.to_be_bytes());
    for d in [n, rows, cols] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend(
        images
            .data()
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}

pub fn encode_idx_labels(labels: &[usize]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&MAGIC_LABELS.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend(labels.iter().map(|&l| l as u8));
    out
}
