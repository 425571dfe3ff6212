//! Steering and braking controllers.
//!
//! Steering maps a predicted angle to a set of drive keys; braking filters
//! detections to the ego lane and fires when the most confident one passes
//! a threshold.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{FRAME_HEIGHT, FRAME_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Key {
    Forward,
    Left,
    Right,
    Slow,
    HardBrake,
}

impl Key {
    const ALL: [Key; 5] = [Key::Forward, Key::Left, Key::Right, Key::Slow, Key::HardBrake];

    fn bit(self) -> u8 {
        1 << self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Key::Forward => "FORWARD",
            Key::Left => "LEFT",
            Key::Right => "RIGHT",
            Key::Slow => "SLOW",
            Key::HardBrake => "HARD_BRAKE",
        }
    }
}

/// A set of pressed keys plus the steering magnitude applied while LEFT or
/// RIGHT is held and the SLOW pulse length.
///
/// Only constructed through [`steer_command`] and the merge helpers, which
/// keep LEFT/RIGHT and SLOW/HARD_BRAKE mutually exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Command {
    keys: u8,
    steer: f32,
    slow_ticks: u32,
}

impl Command {
    /// No keys held.
    pub fn idle() -> Self {
        Self::default()
    }

    pub fn forward() -> Self {
        Self {
            keys: Key::Forward.bit(),
            ..Self::default()
        }
    }

    pub fn contains(&self, key: Key) -> bool {
        self.keys & key.bit() != 0
    }

    pub fn keys(&self) -> impl Iterator<Item = Key> + '_ {
        Key::ALL.into_iter().filter(|k| self.contains(*k))
    }

    /// Signed steering in `[-1, 1]`; zero unless LEFT or RIGHT is held.
    pub fn steer(&self) -> f32 {
        if self.contains(Key::Left) || self.contains(Key::Right) {
            self.steer
        } else {
            0.0
        }
    }

    /// Ticks the SLOW key stays down once pressed; zero without SLOW.
    pub fn slow_ticks(&self) -> u32 {
        self.slow_ticks
    }

    /// Replaces FORWARD with SLOW (used while a slow pulse is still active).
    pub fn with_slow(mut self, ticks: u32) -> Self {
        if self.contains(Key::HardBrake) {
            return self;
        }
        self.keys &= !Key::Forward.bit();
        self.keys |= Key::Slow.bit();
        self.slow_ticks = self.slow_ticks.max(ticks);
        self
    }

    /// HARD_BRAKE overrides FORWARD and SLOW; steering is kept.
    pub fn with_brake(mut self) -> Self {
        self.keys &= !(Key::Forward.bit() | Key::Slow.bit());
        self.keys |= Key::HardBrake.bit();
        self.slow_ticks = 0;
        self
    }

    /// Longitudinal acceleration in m/s² implied by the held keys, before
    /// drag. `None` means no pedal, so drag applies.
    pub fn pedal(&self) -> Option<f64> {
        if self.contains(Key::HardBrake) {
            Some(-8.0)
        } else if self.contains(Key::Slow) {
            Some(-4.0)
        } else if self.contains(Key::Forward) {
            Some(2.0)
        } else {
            None
        }
    }

    pub fn invariants_hold(&self) -> bool {
        !(self.contains(Key::Left) && self.contains(Key::Right))
            && !(self.contains(Key::Slow) && self.contains(Key::HardBrake))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.keys().map(Key::name).collect();
        write!(f, "{{{}}}", names.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteerConfig {
    pub dead_zone: f32,
    pub slow_threshold: f32,
    /// Slow pulse length in ticks per unit |angle|.
    pub slow_gain: f32,
}

impl Default for SteerConfig {
    fn default() -> Self {
        Self {
            dead_zone: 0.02,
            slow_threshold: 0.35,
            slow_gain: 5.0,
        }
    }
}

impl SteerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.dead_zone && self.dead_zone < self.slow_threshold && self.slow_threshold <= 1.0) {
            return Err(Error::config("steering needs 0 <= dead_zone < slow_threshold <= 1"));
        }
        if !(self.slow_gain >= 0.0) {
            return Err(Error::config("slow_gain must be non-negative"));
        }
        Ok(())
    }
}

pub fn steer_command(angle: f32, config: &SteerConfig) -> Result<Command> {
    if !angle.is_finite() {
        return Err(Error::NonFinite("steering angle"));
    }
    let a = angle.clamp(-1.0, 1.0);
    let mut cmd = Command::forward();
    if a.abs() <= config.dead_zone {
        return Ok(cmd);
    }
    cmd.keys |= if a < 0.0 { Key::Left.bit() } else { Key::Right.bit() };
    cmd.steer = a;
    if a.abs() > config.slow_threshold {
        let ticks = (config.slow_gain * a.abs()).round().max(1.0) as u32;
        cmd = cmd.with_slow(ticks);
    }
    Ok(cmd)
}

/// Detector class id for vehicles.
pub const VEHICLE_CLASS: u32 = 3;

/// Pixel box with origin at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f32,
    pub y_min: f32,
    pub x_max: f32,
    pub y_max: f32,
}

impl BBox {
    pub fn new(x_min: f32, y_min: f32, x_max: f32, y_max: f32) -> Result<Self> {
        let w = FRAME_WIDTH as f32;
        let h = FRAME_HEIGHT as f32;
        let ok = 0.0 <= x_min && x_min < x_max && x_max <= w && 0.0 <= y_min && y_min < y_max && y_max <= h;
        if !ok {
            return Err(Error::config(format!(
                "bbox ({x_min}, {y_min}, {x_max}, {y_max}) is empty or outside the frame"
            )));
        }
        Ok(Self { x_min, y_min, x_max, y_max })
    }

    pub fn center_x(&self) -> f32 {
        0.5 * (self.x_min + self.x_max)
    }

    pub fn area(&self) -> f32 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_id: u32,
    pub bbox: BBox,
    pub confidence: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrakeConfig {
    pub threshold: f32,
    /// Horizontal pixel interval `[lo, hi]` treated as the ego lane.
    pub lane_band: (f32, f32),
    pub horizon_row: f32,
}

impl Default for BrakeConfig {
    fn default() -> Self {
        Self {
            threshold: 0.8,
            lane_band: (53.0, 107.0),
            horizon_row: 54.0,
        }
    }
}

impl BrakeConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.lane_band;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config("brake threshold must lie in (0, 1)"));
        }
        if !(0.0 <= lo && lo < hi && hi <= FRAME_WIDTH as f32) {
            return Err(Error::config("lane band must lie within the frame width"));
        }
        Ok(())
    }
}

/// Vehicle detections centered in the lane band and reaching below the
/// horizon row.
pub fn relevant(detections: &[Detection], config: &BrakeConfig) -> Vec<Detection> {
    let (lo, hi) = config.lane_band;
    detections
        .iter()
        .filter(|d| {
            let cx = d.bbox.center_x();
            d.class_id == VEHICLE_CLASS && (lo..=hi).contains(&cx) && d.bbox.y_max > config.horizon_row
        })
        .copied()
        .collect()
}

pub fn brake_decision(detections: &[Detection], config: &BrakeConfig) -> bool {
    relevant(detections, config)
        .iter()
        .map(|d| d.confidence)
        .fold(f32::NEG_INFINITY, f32::max)
        > config.threshold
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn keys(c: &Command) -> Vec<Key> {
        c.keys().collect()
    }

    fn det(cx: f32, y_max: f32, confidence: f32) -> Detection {
        Detection {
            class_id: VEHICLE_CLASS,
            bbox: BBox::new(cx - 10.0, y_max - 15.0, cx + 10.0, y_max).unwrap(),
            confidence,
        }
    }

    #[test]
    fn steer_examples() {
        let cfg = SteerConfig::default();
        assert_eq!(keys(&steer_command(0.0, &cfg).unwrap()), [Key::Forward]);
        let full_left = steer_command(-1.0, &cfg).unwrap();
        assert_eq!(keys(&full_left), [Key::Left, Key::Slow]);
        assert_eq!(full_left.slow_ticks(), 5);
        assert_eq!(full_left.steer(), -1.0);
        assert_eq!(keys(&steer_command(0.2, &cfg).unwrap()), [Key::Forward, Key::Right]);
        assert!(steer_command(f32::NAN, &cfg).is_err());
    }

    #[test]
    fn dead_zone_boundary() {
        let cfg = SteerConfig::default();
        assert_eq!(keys(&steer_command(0.02, &cfg).unwrap()), [Key::Forward]);
        assert_eq!(steer_command(-0.02, &cfg).unwrap().steer(), 0.0);
        assert!(steer_command(0.021, &cfg).unwrap().contains(Key::Right));
        assert!(steer_command(-0.021, &cfg).unwrap().contains(Key::Left));
    }

    #[test]
    fn brake_overrides_pedals() {
        let c = steer_command(-0.9, &SteerConfig::default()).unwrap().with_brake();
        assert_eq!(keys(&c), [Key::Left, Key::HardBrake]);
        assert_eq!(c.pedal(), Some(-8.0));
        assert_eq!(c.with_slow(3), c);
        assert_eq!(Command::idle().pedal(), None);
    }

    #[test]
    fn display_lists_keys() {
        assert_eq!(steer_command(-1.0, &SteerConfig::default()).unwrap().to_string(), "{LEFT, SLOW}");
    }

    #[test]
    fn config_validation() {
        assert!(SteerConfig::default().validate().is_ok());
        assert!(SteerConfig { dead_zone: 0.4, ..Default::default() }.validate().is_err());
        assert!(BrakeConfig::default().validate().is_ok());
        assert!(BrakeConfig { threshold: 1.0, ..Default::default() }.validate().is_err());
        assert!(BrakeConfig { lane_band: (100.0, 170.0), ..Default::default() }.validate().is_err());
    }

    #[test]
    fn relevance_filter() {
        let cfg = BrakeConfig::default();
        assert_eq!(relevant(&[det(80.0, 100.0, 0.5)], &cfg).len(), 1);
        assert!(relevant(&[det(20.0, 100.0, 0.5)], &cfg).is_empty());
        assert!(relevant(&[det(80.0, 50.0, 0.5)], &cfg).is_empty());
        assert!(relevant(&[], &cfg).is_empty());
        let mut other = det(80.0, 100.0, 0.99);
        other.class_id = 1;
        assert!(relevant(&[other], &cfg).is_empty());
    }

    #[test]
    fn brake_examples() {
        let cfg = BrakeConfig::default();
        assert!(!brake_decision(&[], &cfg));
        assert!(brake_decision(&[det(80.0, 100.0, 0.9)], &cfg));
        assert!(!brake_decision(&[det(80.0, 100.0, 0.8)], &cfg));
        assert!(!brake_decision(&[det(20.0, 100.0, 0.95)], &cfg));
    }

    #[test]
    fn bbox_validation() {
        assert!(BBox::new(0.0, 0.0, 160.0, 120.0).is_ok());
        assert!(BBox::new(5.0, 0.0, 5.0, 10.0).is_err());
        assert!(BBox::new(-1.0, 0.0, 5.0, 10.0).is_err());
        assert!(BBox::new(0.0, 0.0, 5.0, 121.0).is_err());
    }

    proptest! {
        #[test]
        fn steer_antisymmetric(a in -1.0f32..=1.0) {
            let cfg = SteerConfig::default();
            let p = steer_command(a, &cfg).unwrap();
            let n = steer_command(-a, &cfg).unwrap();
            prop_assert_eq!(p.contains(Key::Left), n.contains(Key::Right));
            prop_assert_eq!(p.contains(Key::Right), n.contains(Key::Left));
            prop_assert_eq!(p.contains(Key::Slow), n.contains(Key::Slow));
            prop_assert_eq!(p.contains(Key::Forward), n.contains(Key::Forward));
            prop_assert_eq!(p.steer(), -n.steer());
        }

        #[test]
        fn commands_satisfy_invariants(a in -3.0f32..3.0, brake in any::<bool>()) {
            let mut c = steer_command(a, &SteerConfig::default()).unwrap();
            if brake {
                c = c.with_brake();
            }
            prop_assert!(c.invariants_hold());
            prop_assert!(c.contains(Key::Forward) != (c.contains(Key::Slow) || c.contains(Key::HardBrake)));
        }

        #[test]
        fn clamping_is_idempotent(a in 1.0f32..50.0) {
            let cfg = SteerConfig::default();
            prop_assert_eq!(steer_command(a, &cfg).unwrap(), steer_command(1.0, &cfg).unwrap());
            prop_assert_eq!(steer_command(-a, &cfg).unwrap(), steer_command(-1.0, &cfg).unwrap());
        }

        #[test]
        fn brake_monotone_in_confidence(
            confs in prop::collection::vec(0.0f32..1.0, 1..5),
            xs in prop::collection::vec(15.0f32..145.0, 5),
            which in 0usize..5,
            bump in 0.0f32..0.5,
        ) {
            let cfg = BrakeConfig::default();
            let mut dets: Vec<Detection> = confs.iter().zip(&xs).map(|(&c, &x)| det(x, 100.0, c)).collect();
            let before = brake_decision(&dets, &cfg);
            let i = which % dets.len();
            if relevant(&dets[i..=i], &cfg).len() == 1 {
                dets[i].confidence = (dets[i].confidence + bump).min(1.0);
            }
            prop_assert!(!before || brake_decision(&dets, &cfg));
        }
    }
}
