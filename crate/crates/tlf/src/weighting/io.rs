//! Parameter persistence.
//!
//! File layout (little-endian): u32 header length, then a UTF-8 JSON
//! header naming the scheme and each block's shape, then every block's
//! values as flat 32-bit floats in header order, row-major.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Array4};
use serde::{Deserialize, Serialize};

use super::{FixedWeights, Params, SeParams};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct BlockDesc {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    scheme: String,
    blocks: Vec<BlockDesc>,
}

fn blocks_of(params: &Params) -> (Header, Vec<Vec<f64>>) {
    match params {
        Params::Fixed(w) => (
            Header {
                scheme: "fixed".into(),
                blocks: vec![
                    BlockDesc { name: "alpha".into(), shape: vec![] },
                    BlockDesc { name: "beta".into(), shape: vec![] },
                ],
            },
            vec![vec![w.alpha], vec![w.beta]],
        ),
        Params::Se(p) => (
            Header {
                scheme: "se".into(),
                blocks: vec![
                    BlockDesc { name: "conv1".into(), shape: p.conv1.shape().to_vec() },
                    BlockDesc { name: "conv2".into(), shape: p.conv2.shape().to_vec() },
                    BlockDesc { name: "w1".into(), shape: p.w1.shape().to_vec() },
                    BlockDesc { name: "w2".into(), shape: p.w2.shape().to_vec() },
                ],
            },
            vec![
                p.conv1.iter().copied().collect(),
                p.conv2.iter().copied().collect(),
                p.w1.iter().copied().collect(),
                p.w2.iter().copied().collect(),
            ],
        ),
    }
}

/// Serialize parameters to a writer.
pub fn write_params<W: Write>(writer: &mut W, params: &Params) -> Result<()> {
    let (header, blocks) = blocks_of(params);
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::Config(format!("parameter header serialization failed: {e}")))?;
    writer.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    writer.write_all(&header_bytes)?;
    for block in blocks {
        for v in block {
            writer.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_exact_or_err<R: Read>(reader: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    reader
        .read_exact(buf)
        .map_err(|e| Error::Config(format!("truncated parameter file while reading {what}: {e}")))
}

/// Deserialize parameters from a reader.
pub fn read_params<R: Read>(reader: &mut R) -> Result<Params> {
    let mut len_bytes = [0u8; 4];
    read_exact_or_err(reader, &mut len_bytes, "header length")?;
    let len = u32::from_le_bytes(len_bytes) as usize;
    if len > 1 << 20 {
        return Err(Error::Config(format!("implausible parameter header length {len}")));
    }
    let mut header_bytes = vec![0u8; len];
    read_exact_or_err(reader, &mut header_bytes, "header")?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Config(format!("bad parameter header JSON: {e}")))?;

    let mut read_block = |shape: &[usize]| -> Result<Vec<f64>> {
        let count: usize = shape.iter().product::<usize>().max(1);
        let mut bytes = vec![0u8; count * 4];
        read_exact_or_err(reader, &mut bytes, "block values")?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    };

    let expect_block = |header: &Header, idx: usize, name: &str| -> Result<Vec<usize>> {
        let block = header.blocks.get(idx).ok_or_else(|| {
            Error::Config(format!("parameter header is missing block {name:?}"))
        })?;
        if block.name != name {
            return Err(Error::Config(format!(
                "parameter block {idx} is {:?}, expected {name:?}",
                block.name
            )));
        }
        Ok(block.shape.clone())
    };

    match header.scheme.as_str() {
        "fixed" => {
            expect_block(&header, 0, "alpha")?;
            expect_block(&header, 1, "beta")?;
            let alpha = read_block(&[])?[0];
            let beta = read_block(&[])?[0];
            Ok(Params::Fixed(FixedWeights::new(alpha, beta)?))
        }
        "se" => {
            let s1 = expect_block(&header, 0, "conv1")?;
            let s2 = expect_block(&header, 1, "conv2")?;
            let s3 = expect_block(&header, 2, "w1")?;
            let s4 = expect_block(&header, 3, "w2")?;
            let to4 = |shape: &[usize], data: Vec<f64>, name: &str| -> Result<Array4<f64>> {
                let dims: [usize; 4] = shape
                    .try_into()
                    .map_err(|_| Error::Config(format!("{name} shape must have 4 dims")))?;
                Array4::from_shape_vec(dims, data)
                    .map_err(|e| Error::Config(format!("{name} shape mismatch: {e}")))
            };
            let to2 = |shape: &[usize], data: Vec<f64>, name: &str| -> Result<Array2<f64>> {
                let dims: [usize; 2] = shape
                    .try_into()
                    .map_err(|_| Error::Config(format!("{name} shape must have 2 dims")))?;
                Array2::from_shape_vec((dims[0], dims[1]), data)
                    .map_err(|e| Error::Config(format!("{name} shape mismatch: {e}")))
            };
            let conv1 = to4(&s1, read_block(&s1)?, "conv1")?;
            let conv2 = to4(&s2, read_block(&s2)?, "conv2")?;
            let w1 = to2(&s3, read_block(&s3)?, "w1")?;
            let w2 = to2(&s4, read_block(&s4)?, "w2")?;
            let params = SeParams { conv1, conv2, w1, w2 };
            params.validate()?;
            Ok(Params::Se(params))
        }
        other => Err(Error::Config(format!("unknown weighting scheme {other:?}"))),
    }
}

/// Write parameters to a file.
pub fn save_params(path: &Path, params: &Params) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    write_params(&mut writer, params)?;
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read parameters from a file.
pub fn load_params(path: &Path) -> Result<Params> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = std::io::BufReader::new(file);
    read_params(&mut reader)
}
