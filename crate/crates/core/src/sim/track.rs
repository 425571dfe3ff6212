//! Piecewise-constant-curvature tracks; eased bends are built from short
//! constant steps.
//!
//! Curvature is signed with positive values turning right. World
//! coordinates are planar `(x, y)` with heading measured counter-clockwise
//! from +x, so a right turn decreases the heading.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_CURVATURE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub length: f64,
    pub curvature: f64,
}

/// Centerline point: position and heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy)]
struct Start {
    s: f64,
    pose: Pose,
}

#[derive(Debug, Clone)]
pub struct Track {
    name: String,
    segments: Vec<Segment>,
    lane_width: f64,
    looped: bool,
    starts: Vec<Start>,
    length: f64,
}

/// Pose after travelling `u` along an arc of signed curvature `kappa`
/// (right-positive) from `p`.
fn arc(p: Pose, kappa: f64, u: f64) -> Pose {
    let k = -kappa;
    if k.abs() < 1e-12 {
        return Pose {
            x: p.x + u * p.heading.cos(),
            y: p.y + u * p.heading.sin(),
            heading: p.heading,
        };
    }
    let h = p.heading + k * u;
    Pose {
        x: p.x + (h.sin() - p.heading.sin()) / k,
        y: p.y - (h.cos() - p.heading.cos()) / k,
        heading: h,
    }
}

/// Piecewise-linear curvature profile through `knots` (`(s, kappa)`,
/// increasing `s`) as constant-curvature steps of at most 1 m. Each step
/// takes its midpoint curvature, which keeps every piece's heading change
/// exact.
fn ramped(knots: &[(f64, f64)]) -> Vec<Segment> {
    let mut out = Vec::new();
    for w in knots.windows(2) {
        let ((s0, k0), (s1, k1)) = (w[0], w[1]);
        let len = s1 - s0;
        if len <= 0.0 {
            continue;
        }
        let n = len.ceil() as usize;
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64;
            out.push(Segment {
                length: len / n as f64,
                curvature: k0 + (k1 - k0) * t,
            });
        }
    }
    out
}

impl Track {
    pub fn new(name: impl Into<String>, segments: Vec<Segment>, lane_width: f64, looped: bool) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::config("track needs at least one segment"));
        }
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.length > 0.0) || !seg.curvature.is_finite() || seg.curvature.abs() > MAX_CURVATURE {
                return Err(Error::config(format!(
                    "segment {i}: length {} / curvature {} not drivable",
                    seg.length, seg.curvature
                )));
            }
        }
        if !(lane_width > 0.0) {
            return Err(Error::config("lane width must be positive"));
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut pose = Pose { x: 0.0, y: 0.0, heading: 0.0 };
        let mut s = 0.0;
        for seg in &segments {
            starts.push(Start { s, pose });
            pose = arc(pose, seg.curvature, seg.length);
            s += seg.length;
        }
        Ok(Self {
            name: name.into(),
            segments,
            lane_width,
            looped,
            starts,
            length: s,
        })
    }

    /// Named tracks: `straight` (10 km), `highway` (the standard loop) and
    /// `city` (tighter loop).
    pub fn by_id(id: &str) -> Result<Self> {
        match id {
            "straight" => Self::straight(10_000.0),
            "highway" => Self::highway(),
            "city" => Self::city(),
            other => Err(Error::config(format!("unknown track '{other}'"))),
        }
    }

    pub fn straight(length: f64) -> Result<Self> {
        Self::new(
            "straight",
            vec![Segment { length, curvature: 0.0 }],
            3.5,
            false,
        )
    }

    /// Rounded rectangle of right-hand corners with an S-bend on each long
    /// side. Curvature ramps linearly into and out of every bend (`ease`
    /// meters per corner ramp). Each S-bend has zero net heading and
    /// lateral change, and the loop is symmetric under a half turn, so it
    /// closes.
    fn rounded_loop(name: &str, long: f64, short: f64, radius: f64, ease: f64, bend: f64, bend_len: f64) -> Result<Self> {
        let k = 1.0 / radius;
        let corner = ramped(&[(0.0, 0.0), (ease, k), (FRAC_PI_2 * radius, k), (FRAC_PI_2 * radius + ease, 0.0)]);
        // Crossing shifted by r/4 so the lead-in ramp keeps the first half's
        // heading integral at zero.
        let (l, r) = (bend_len, bend_len / 3.0);
        let c = l + r / 4.0;
        let s_bend = ramped(&[
            (0.0, 0.0),
            (r, bend),
            (c - r, bend),
            (c + r, -bend),
            (2.0 * l, -bend),
            (4.0 * l - c - r, -bend),
            (4.0 * l - c + r, bend),
            (4.0 * l - r, bend),
            (4.0 * l, 0.0),
        ]);
        let lead = (long - 4.0 * bend_len) / 2.0;
        let mut segs = Vec::new();
        for _ in 0..2 {
            segs.push(Segment { length: lead, curvature: 0.0 });
            segs.extend_from_slice(&s_bend);
            segs.push(Segment { length: lead, curvature: 0.0 });
            segs.extend_from_slice(&corner);
            segs.push(Segment { length: short, curvature: 0.0 });
            segs.extend_from_slice(&corner);
        }
        Self::new(name, segs, 3.5, true)
    }

    pub fn highway() -> Result<Self> {
        Self::rounded_loop("highway", 300.0, 150.0, 45.0, 25.0, 1.0 / 100.0, 30.0)
    }

    pub fn city() -> Result<Self> {
        Self::rounded_loop("city", 160.0, 80.0, 30.0, 20.0, 1.0 / 50.0, 20.0)
    }

    /// Left-right mirror: every curvature negated.
    pub fn mirrored(&self) -> Self {
        let segs = self
            .segments
            .iter()
            .map(|s| Segment {
                length: s.length,
                curvature: -s.curvature,
            })
            .collect();
        Self::new(format!("{}-mirrored", self.name), segs, self.lane_width, self.looped)
            .expect("mirroring keeps a valid track valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn lane_width(&self) -> f64 {
        self.lane_width
    }

    pub fn is_loop(&self) -> bool {
        self.looped
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Arc length mapped onto the track: wrapped for loops, unchanged
    /// otherwise (open tracks extend straight past either end).
    pub fn wrap(&self, s: f64) -> f64 {
        if self.looped {
            s.rem_euclid(self.length)
        } else {
            s
        }
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let s = self.wrap(s);
        let i = self.starts.partition_point(|st| st.s <= s).saturating_sub(1);
        (i, s - self.starts[i].s)
    }

    pub fn curvature(&self, s: f64) -> f64 {
        let s = self.wrap(s);
        if !self.looped && (s < 0.0 || s > self.length) {
            return 0.0;
        }
        self.segments[self.locate(s).0].curvature
    }

    pub fn pose(&self, s: f64) -> Pose {
        let s = self.wrap(s);
        if !self.looped && s < 0.0 {
            return arc(self.starts[0].pose, 0.0, s);
        }
        let (i, u) = self.locate(s);
        let seg = self.segments[i];
        if !self.looped && u > seg.length {
            let end = arc(self.starts[i].pose, seg.curvature, seg.length);
            return arc(end, 0.0, u - seg.length);
        }
        arc(self.starts[i].pose, seg.curvature, u)
    }
}
