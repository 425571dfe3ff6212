//! 8-bit grayscale camera frames and PGM export.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub const FRAME_WIDTH: usize = 160;
pub const FRAME_HEIGHT: usize = 120;
pub const FRAME_BYTES: usize = FRAME_WIDTH * FRAME_HEIGHT;

/// Row-major single-channel image, origin top-left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::shape(format!(
                "{width}x{height} frame needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    /// A blank camera-sized frame.
    pub fn camera(value: u8) -> Self {
        Self::filled(FRAME_WIDTH, FRAME_HEIGHT, value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Horizontal (left-right) mirror.
    pub fn mirrored(&self) -> Self {
        let mut pixels = self.pixels.clone();
        for row in pixels.chunks_exact_mut(self.width) {
            row.reverse();
        }
        Self { pixels, ..*self }
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&p| f64::from(p)).sum::<f64>() / self.pixels.len() as f64
    }

    /// Raw intensities as an `(h, w, 1)` tensor (no normalization).
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let data = self.pixels.iter().map(|&p| T::from_u8(p).unwrap()).collect();
        Tensor::new(vec![self.height, self.width, 1], data).expect("frame dimensions are positive")
    }

    pub fn write_pgm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len() + 16);
        self.write_pgm(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    /// Tiles frames left-to-right, top-to-bottom with a 1-pixel gap.
    pub fn montage(frames: &[GrayFrame], columns: usize) -> Option<GrayFrame> {
        let first = frames.first()?;
        let columns = columns.clamp(1, frames.len());
        let rows = frames.len().div_ceil(columns);
        let (fw, fh) = (first.width, first.height);
        let width = columns * (fw + 1) - 1;
        let height = rows * (fh + 1) - 1;
        let mut out = GrayFrame::filled(width, height, 0);
        for (i, f) in frames.iter().enumerate() {
            let (ox, oy) = ((i % columns) * (fw + 1), (i / columns) * (fh + 1));
            for y in 0..fh.min(f.height) {
                for x in 0..fw.min(f.width) {
                    out.set(ox + x, oy + y, f.get(x, y));
                }
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_is_involution() {
        let f = GrayFrame::new(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(f.mirrored().pixels(), &[3, 2, 1, 6, 5, 4]);
        assert_eq!(f.mirrored().mirrored(), f);
    }

    #[test]
    fn pgm_header() {
        let f = GrayFrame::filled(4, 2, 9);
        let bytes = f.to_pgm();
        assert!(bytes.starts_with(b"P5\n4 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 8);
    }

    #[test]
    fn montage_dimensions() {
        let fs = vec![GrayFrame::filled(4, 3, 200); 5];
        let m = GrayFrame::montage(&fs, 3).unwrap();
        assert_eq!((m.width(), m.height()), (3 * 5 - 1, 2 * 4 - 1));
    }
}
