//! `DDMV1` checkpoint format.
//!
//! ```text
//! "DDMV1"
//! u16 name length, name bytes (UTF-8)
//! u32 × 3 input shape (h, w, c), u8 normalize-input flag
//! u32 layer count, per layer:
//!     u8 kind, u32 kh, u32 kw, u32 sh, u32 sw, u8 padding,
//!     u32 in channels, u32 out channels, u8 activation
//! u32 tensor count, per tensor: u8 rank, u32 × rank dims, f32 × len data
//! u8 optimizer flag; when 1:
//!     u64 step, f32 lr, f32 beta1, f32 beta2, f32 epsilon,
//!     f32 × len first moments (all tensors), f32 × len second moments
//! u32 CRC-32 of every preceding byte
//! ```
//!
//! Integers and scalars are little-endian. Kernel tensors are stored
//! `(kh, kw, cin, cout)`: spatial rows outermost, output channel innermost.

use std::path::Path;

use thiserror::Error;

use super::{Model, ModelSpec};
use crate::tensor::{Activation, AdamConfig, AdamState, LayerKind, LayerSpec, Padding, Tensor};

pub const MAGIC: &[u8; 5] = b"DDMV1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: bad magic")]
    BadMagic,
    #[error("checkpoint truncated: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("checkpoint checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

/// A loaded checkpoint.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub optimizer: Option<AdamState>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("dimension fits in u32");
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, data: &[f32]) {
        self.0.reserve(data.len() * 4);
        for v in data {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(CheckpointError::Truncated {
                offset: self.pos,
                needed: self.pos + n - self.bytes.len(),
            });
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<usize, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32, CheckpointError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, CheckpointError> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| malformed("tensor length overflow"))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn malformed(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Malformed(msg.into())
}

fn kind_code(k: LayerKind) -> u8 {
    match k {
        LayerKind::Normalization => 0,
        LayerKind::Conv2D => 1,
        LayerKind::SeparableConv2D => 2,
        LayerKind::Flatten => 3,
        LayerKind::Dense => 4,
    }
}

fn kind_from(code: u8) -> Result<LayerKind, CheckpointError> {
    Ok(match code {
        0 => LayerKind::Normalization,
        1 => LayerKind::Conv2D,
        2 => LayerKind::SeparableConv2D,
        3 => LayerKind::Flatten,
        4 => LayerKind::Dense,
        other => return Err(malformed(format!("unknown layer kind {other}"))),
    })
}

/// Serializes `model` and, when given, the optimizer moments.
pub fn save(model: &Model, optimizer: Option<&AdamState>) -> Vec<u8> {
    let spec = model.spec();
    let mut w = Writer(Vec::with_capacity(model.param_count() * 12 + 1024));
    w.0.extend_from_slice(MAGIC);
    let name = spec.name.as_bytes();
    w.u16(u16::try_from(name.len()).expect("model name under 64 KiB"));
    w.0.extend_from_slice(name);
    let (h, wd, c) = spec.input_shape;
    w.u32(h);
    w.u32(wd);
    w.u32(c);
    w.u8(spec.normalize_input as u8);
    w.u32(spec.layers.len());
    for l in &spec.layers {
        w.u8(kind_code(l.kind));
        w.u32(l.kernel.0);
        w.u32(l.kernel.1);
        w.u32(l.stride.0);
        w.u32(l.stride.1);
        w.u8(matches!(l.padding, Padding::Same) as u8);
        w.u32(l.in_channels);
        w.u32(l.out_channels);
        w.u8(matches!(l.activation, Activation::Relu) as u8);
    }
    w.u32(model.params().len());
    for p in model.params() {
        w.u8(u8::try_from(p.rank()).expect("rank fits in u8"));
        for &d in p.shape() {
            w.u32(d);
        }
        w.f32s(p.data());
    }
    match optimizer {
        None => w.u8(0),
        Some(state) => {
            w.u8(1);
            w.u64(state.step);
            let cfg = state.config;
            w.f32s(&[cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon]);
            for m in &state.first_moment {
                w.f32s(m.data());
            }
            for v in &state.second_moment {
                w.f32s(v.data());
            }
        }
    }
    let crc = crc32fast::hash(&w.0);
    w.0.extend_from_slice(&crc.to_le_bytes());
    w.0
}

pub fn load(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < MAGIC.len() {
        return if MAGIC.starts_with(bytes) {
            Err(CheckpointError::Truncated {
                offset: 0,
                needed: MAGIC.len() + 4 - bytes.len(),
            })
        } else {
            Err(CheckpointError::BadMagic)
        };
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 4 {
        return Err(CheckpointError::Truncated {
            offset: bytes.len(),
            needed: MAGIC.len() + 4 - bytes.len(),
        });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let mut r = Reader {
        bytes: body,
        pos: MAGIC.len(),
    };
    let checkpoint = parse_body(&mut r)?;
    if r.pos != body.len() {
        return Err(malformed(format!("{} trailing bytes", body.len() - r.pos)));
    }
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(CheckpointError::ChecksumMismatch { stored, computed });
    }
    Ok(checkpoint)
}

fn parse_body(r: &mut Reader<'_>) -> Result<Checkpoint, CheckpointError> {
    let name_len = r.u16()? as usize;
    let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| malformed("model name is not UTF-8"))?;
    let input_shape = (r.u32()?, r.u32()?, r.u32()?);
    let normalize_input = r.u8()? != 0;
    let n_layers = r.u32()?;
    let mut layers = Vec::with_capacity(n_layers.min(1024));
    for _ in 0..n_layers {
        let kind = kind_from(r.u8()?)?;
        let kernel = (r.u32()?, r.u32()?);
        let stride = (r.u32()?, r.u32()?);
        let padding = if r.u8()? != 0 { Padding::Same } else { Padding::Valid };
        let in_channels = r.u32()?;
        let out_channels = r.u32()?;
        let activation = if r.u8()? != 0 { Activation::Relu } else { Activation::Linear };
        layers.push(LayerSpec {
            kind,
            kernel,
            stride,
            padding,
            in_channels,
            out_channels,
            activation,
        });
    }
    let spec = ModelSpec {
        name,
        input_shape,
        layers,
        normalize_input,
    };

    let n_tensors = r.u32()?;
    let mut params = Vec::with_capacity(n_tensors.min(1024));
    for _ in 0..n_tensors {
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| malformed("tensor size overflow"))?;
        let data = r.f32s(len)?;
        params.push(Tensor::new(shape, data).map_err(|e| malformed(e.to_string()))?);
    }

    let optimizer = match r.u8()? {
        0 => None,
        1 => {
            let step = r.u64()?;
            let config = AdamConfig {
                learning_rate: r.f32()?,
                beta1: r.f32()?,
                beta2: r.f32()?,
                epsilon: r.f32()?,
            };
            let read_moments = |r: &mut Reader<'_>| -> Result<Vec<Tensor>, CheckpointError> {
                params
                    .iter()
                    .map(|p| {
                        let d = r.f32s(p.len())?;
                        Tensor::new(p.shape().to_vec(), d).map_err(|e| malformed(e.to_string()))
                    })
                    .collect()
            };
            let first_moment = read_moments(r)?;
            let second_moment = read_moments(r)?;
            Some(AdamState {
                config,
                step,
                first_moment,
                second_moment,
            })
        }
        other => return Err(malformed(format!("optimizer flag {other}"))),
    };

    let model = Model::from_params(spec, params).map_err(|e| malformed(e.to_string()))?;
    Ok(Checkpoint { model, optimizer })
}

pub fn save_to_path(path: impl AsRef<Path>, model: &Model, optimizer: Option<&AdamState>) -> std::io::Result<()> {
    std::fs::write(path, save(model, optimizer))
}

pub fn load_from_path(path: impl AsRef<Path>) -> crate::Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    Ok(load(&bytes)?)
}
