//! `DDDS1` dataset files.
//!
//! Layout, little-endian:
//!
//! ```text
//! magic   b"DDDS1"
//! u32     sample count N
//! N ×     160·120 bytes of 8-bit grayscale, then f32 angle
//! ```
//!
//! Frames are always camera-sized, so a file of N samples is
//! `9 + N·19204` bytes.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::frame::{GrayFrame, FRAME_BYTES, FRAME_HEIGHT, FRAME_WIDTH};

pub const MAGIC: &[u8; 5] = b"DDDS1";
const HEADER: usize = 5 + 4;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetFormatError {
    #[error("not a DDDS1 dataset")]
    BadMagic,
    #[error("dataset truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("malformed dataset: {0}")]
    Malformed(String),
}

pub fn encoded_len(count: usize) -> usize {
    HEADER + count * (FRAME_BYTES + 4)
}

/// Fails unless every frame is camera-sized.
pub fn encode_dataset(dataset: &Dataset) -> Result<Vec<u8>> {
    if let Some(s) = dataset.samples().first() {
        if (s.frame.width(), s.frame.height()) != (FRAME_WIDTH, FRAME_HEIGHT) {
            return Err(Error::shape(format!(
                "dataset frames are {}x{}, file format needs {FRAME_WIDTH}x{FRAME_HEIGHT}",
                s.frame.width(),
                s.frame.height()
            )));
        }
    }
    let mut out = Vec::with_capacity(encoded_len(dataset.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dataset.len() as u32).to_le_bytes());
    for s in dataset.samples() {
        out.extend_from_slice(s.frame.pixels());
        out.extend_from_slice(&s.angle.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(DatasetFormatError::BadMagic.into());
    }
    if bytes.len() < HEADER {
        return Err(DatasetFormatError::Truncated { expected: HEADER, found: bytes.len() }.into());
    }
    let count = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let expected = encoded_len(count);
    if bytes.len() < expected {
        return Err(DatasetFormatError::Truncated { expected, found: bytes.len() }.into());
    }
    if bytes.len() > expected {
        return Err(DatasetFormatError::Malformed(format!("{} trailing bytes", bytes.len() - expected)).into());
    }
    let mut samples = Vec::with_capacity(count);
    let mut at = HEADER;
    for i in 0..count {
        let pixels = bytes[at..at + FRAME_BYTES].to_vec();
        at += FRAME_BYTES;
        let angle = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        at += 4;
        let frame = GrayFrame::new(FRAME_WIDTH, FRAME_HEIGHT, pixels)?;
        let sample = Sample::new(frame, angle)
            .map_err(|_| DatasetFormatError::Malformed(format!("sample {i} has angle {angle} outside [-1, 1]")))?;
        samples.push(sample);
    }
    Dataset::new(samples)
}

pub fn write_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    fs::write(path, encode_dataset(dataset)?)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    decode_dataset(&fs::read(path)?)
}
