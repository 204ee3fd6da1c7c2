//! IDX container parsing (the MNIST file format).
//!
//! Layout: two zero bytes, a type byte, a dimension-count byte, one
//! big-endian `u32` per dimension, then the raw payload. Only unsigned-byte
//! payloads are accepted, as label files (`0x00000801`) or 3-D image files
//! (`0x00000803`). Pixels map to `[−1, 1]` via `v / 127.5 − 1`.

use std::path::Path;

use crate::data::dataset::Dataset;
use crate::error::{Error, ParseErrorKind, Result};
use crate::matrix::Matrix;

pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_MAGIC: u32 = 0x0000_0803;
const TYPE_U8: u8 = 0x08;

fn parse_err(kind: ParseErrorKind, offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        kind,
        offset,
        message: message.into(),
    }
}

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| {
            parse_err(
                ParseErrorKind::Truncated,
                offset,
                format!(
                    "header needs {} bytes, file has {}",
                    offset + 4,
                    bytes.len()
                ),
            )
        })
}

/// Parse an in-memory IDX file.
pub fn parse_idx_bytes(bytes: &[u8], source: &str) -> Result<Dataset> {
    if bytes.len() < 4 {
        return Err(parse_err(
            ParseErrorKind::Truncated,
            bytes.len(),
            format!("need a 4-byte magic number, file has {} bytes", bytes.len()),
        ));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(parse_err(
            ParseErrorKind::BadMagic,
            0,
            format!(
                "magic must start with two zero bytes, got {:02x}{:02x}",
                bytes[0], bytes[1]
            ),
        ));
    }
    if bytes[2] != TYPE_U8 {
        return Err(parse_err(
            ParseErrorKind::UnsupportedType,
            2,
            format!(
                "only unsigned-byte payloads (0x08) are supported, got 0x{:02x}",
                bytes[2]
            ),
        ));
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let ndims = match magic {
        LABEL_MAGIC => 1,
        IMAGE_MAGIC => 3,
        _ => {
            return Err(parse_err(
                ParseErrorKind::UnsupportedType,
                3,
                format!(
                    "magic 0x{magic:08x} is neither a label file (1-D) nor an image file (3-D)"
                ),
            ))
        }
    };
    let mut dims = Vec::with_capacity(ndims);
    for k in 0..ndims {
        dims.push(read_u32_be(bytes, 4 + 4 * k)? as usize);
    }
    let header = 4 + 4 * ndims;
    let expected = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| parse_err(ParseErrorKind::Truncated, 4, "declared dimensions overflow"))?;
    let actual = bytes.len() - header;
    if actual < expected {
        return Err(parse_err(
            ParseErrorKind::Truncated,
            bytes.len(),
            format!("payload should be {expected} bytes, found {actual}"),
        ));
    }
    if actual > expected {
        return Err(parse_err(
            ParseErrorKind::TrailingBytes,
            header + expected,
            format!("payload should be {expected} bytes, found {actual}"),
        ));
    }
    let payload = &bytes[header..];
    let n = dims[0];
    if ndims == 1 {
        let labels = payload.iter().map(|&b| usize::from(b)).collect();
        return Dataset::new(Matrix::zeros(n, 0), Some(labels), source);
    }
    let width = dims[1] * dims[2];
    let data = payload
        .iter()
        .map(|&b| f64::from(b) / 127.5 - 1.0)
        .collect();
    Dataset::new(Matrix::new(n, width, data)?, None, source)
}

/// Parse an IDX file from disk.
pub fn parse_idx(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx_bytes(&bytes, &path.display().to_string())
}

/// Images plus their label file, joined into one labelled dataset.
pub fn load_idx_pair(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let mut ds = parse_idx(images)?;
    let lab = parse_idx(labels)?;
    let labels = lab
        .labels
        .ok_or_else(|| Error::Config("label path does not hold a label file".into()))?;
    if labels.len() != ds.len() {
        return Err(Error::Shape(format!(
            "{} labels for {} images",
            labels.len(),
            ds.len()
        )));
    }
    ds.labels = Some(labels);
    Ok(ds)
}

/// Encode an unsigned-byte IDX file with the given dimensions.
pub fn encode_idx_u8(dims: &[u32], payload: &[u8]) -> Result<Vec<u8>> {
    if dims.is_empty() || dims.len() > 255 {
        return Err(Error::Config(
            "IDX needs between 1 and 255 dimensions".into(),
        ));
    }
    let expected: usize = dims.iter().map(|&d| d as usize).product();
    if expected != payload.len() {
        return Err(Error::Shape(format!(
            "dimensions describe {expected} bytes, payload has {}",
            payload.len()
        )));
    }
    let mut out = vec![0, 0, TYPE_U8, dims.len() as u8];
    for d in dims {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(payload);
    Ok(out)
}
