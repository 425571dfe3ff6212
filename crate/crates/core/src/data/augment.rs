use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Sample;
use crate::error::{Error, Result};
use crate::frame::GrayFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub probability: f32,
    pub zoom: (f32, f32),
    pub brightness: (f32, f32),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            probability: 0.5,
            zoom: (1.0, 1.3),
            brightness: (0.7, 1.3),
        }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        Self {
            probability: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |(a, b): (f32, f32)| a <= b;
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::config("augmentation probability outside [0, 1]"));
        }
        if self.zoom.0 < 1.0 || !ordered(self.zoom) {
            return Err(Error::config("zoom range must satisfy 1 <= lo <= hi"));
        }
        if self.brightness.0 <= 0.0 || !ordered(self.brightness) {
            return Err(Error::config("brightness range must satisfy 0 < lo <= hi"));
        }
        Ok(())
    }
}

/// The transform picked for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Augmentation {
    Identity,
    Zoom(f32),
    Flip,
    Brightness(f32),
}

impl Augmentation {
    /// With probability `config.probability`, one of zoom / flip /
    /// brightness chosen uniformly, with its factor drawn from the range.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, config: &AugmentConfig) -> Self {
        if rng.random::<f32>() >= config.probability {
            return Augmentation::Identity;
        }
        let draw = |rng: &mut R, (lo, hi): (f32, f32)| {
            if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        };
        match rng.random_range(0..3) {
            0 => Augmentation::Zoom(draw(rng, config.zoom)),
            1 => Augmentation::Flip,
            _ => Augmentation::Brightness(draw(rng, config.brightness)),
        }
    }

    pub fn apply(self, sample: &Sample) -> Sample {
        match self {
            Augmentation::Identity => sample.clone(),
            Augmentation::Flip => sample.mirrored(),
            Augmentation::Zoom(f) => Sample {
                frame: zoom(&sample.frame, f),
                angle: sample.angle,
            },
            Augmentation::Brightness(f) => Sample {
                frame: brightness(&sample.frame, f),
                angle: sample.angle,
            },
        }
    }
}

pub fn augment<R: Rng + ?Sized>(sample: &Sample, rng: &mut R, config: &AugmentConfig) -> Sample {
    Augmentation::sample(rng, config).apply(sample)
}

/// Center crop by `factor` (≥ 1), resized back with bilinear sampling.
pub fn zoom(frame: &GrayFrame, factor: f32) -> GrayFrame {
    let (w, h) = (frame.width(), frame.height());
    let factor = factor.max(1.0);
    let mut out = GrayFrame::filled(w, h, 0);
    let (cx, cy) = (w as f32 / 2.0, h as f32 / 2.0);
    for y in 0..h {
        let sy = (cy + (y as f32 + 0.5 - cy) / factor - 0.5).clamp(0.0, (h - 1) as f32);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = sy - y0 as f32;
        for x in 0..w {
            let sx = (cx + (x as f32 + 0.5 - cx) / factor - 0.5).clamp(0.0, (w - 1) as f32);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let fx = sx - x0 as f32;
            let p = |xx, yy| f32::from(frame.get(xx, yy));
            let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
            let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            out.set(x, y, v.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Multiplies every pixel by `factor`, clamped to `[0, 255]`.
pub fn brightness(frame: &GrayFrame, factor: f32) -> GrayFrame {
    let mut out = frame.clone();
    for p in out.pixels_mut() {
        *p = (f32::from(*p) * factor).round().clamp(0.0, 255.0) as u8;
    }
    out
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn sample(angle: f32) -> Sample {
        let frame = GrayFrame::new(8, 6, (0..48).map(|i| (i * 5) as u8).collect()).unwrap();
        Sample::new(frame, angle).unwrap()
    }

    #[test]
    fn identity_branch_unchanged() {
        let s = sample(0.4);
        assert_eq!(Augmentation::Identity.apply(&s), s);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(augment(&s, &mut rng, &AugmentConfig::disabled()), s);
    }

    #[test]
    fn flip_negates_angle_and_mirrors() {
        let s = sample(0.4);
        let f = Augmentation::Flip.apply(&s);
        assert_eq!(f.angle, -0.4);
        assert_eq!(f.frame, s.frame.mirrored());
    }

    #[test]
    fn brightness_clamps() {
        let s = Sample::new(GrayFrame::filled(4, 4, 200), 0.1).unwrap();
        let b = Augmentation::Brightness(1.3).apply(&s);
        assert!(b.frame.pixels().iter().all(|&p| p == 255));
        assert_eq!(b.angle, 0.1);
    }

    #[test]
    fn unit_zoom_is_identity() {
        let s = sample(0.0);
        assert_eq!(zoom(&s.frame, 1.0), s.frame);
    }

    #[test]
    fn zoom_keeps_constant_frame() {
        let f = GrayFrame::filled(16, 12, 91);
        assert_eq!(zoom(&f, 1.27), f);
    }

    #[test]
    fn branch_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = AugmentConfig::default();
        let n = 30_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let i = match Augmentation::sample(&mut rng, &cfg) {
                Augmentation::Identity => 0,
                Augmentation::Zoom(z) => {
                    assert!((1.0..=1.3).contains(&z));
                    1
                }
                Augmentation::Flip => 2,
                Augmentation::Brightness(b) => {
                    assert!((0.7..=1.3).contains(&b));
                    3
                }
            };
            counts[i] += 1;
        }
        let frac = |c: usize| c as f64 / n as f64;
        assert!((frac(counts[0]) - 0.5).abs() < 0.02);
        for &c in &counts[1..] {
            assert!((frac(c) - 1.0 / 6.0).abs() < 0.02);
        }
    }

    #[test]
    fn config_validation() {
        assert!(AugmentConfig::default().validate().is_ok());
        assert!(AugmentConfig { probability: 1.5, ..Default::default() }.validate().is_err());
        assert!(AugmentConfig { zoom: (0.9, 1.2), ..Default::default() }.validate().is_err());
        assert!(AugmentConfig { brightness: (0.0, 1.2), ..Default::default() }.validate().is_err());
    }
}
