//! Privileged world observers: the pure-pursuit steering oracle that labels
//! training data, and ground-truth vehicle detections.

use serde::{Deserialize, Serialize};

use super::camera::{Camera, VehicleFrame};
use super::track::Track;
use super::vehicle::{VehicleParams, VehicleState};
use super::LeadVehicle;
use crate::control::{BBox, Detection, VEHICLE_CLASS};
use crate::frame::{FRAME_HEIGHT, FRAME_WIDTH};

/// Default pure-pursuit lookahead, meters.
pub const LOOKAHEAD: f64 = 12.0;

/// Lead vehicle position `(forward, right)` in the ego vehicle frame.
pub fn lead_position(track: &Track, state: &VehicleState, lead: &LeadVehicle) -> (f64, f64) {
    let frame = VehicleFrame::new(state.world_pose(track));
    let p = track.pose(state.s + lead.gap);
    frame.local(p.x, p.y)
}

/// Steering in `[-1, 1]` that arcs onto the lane-center point `lookahead`
/// meters further along the track, scaled by full-lock curvature.
pub fn oracle_steering(track: &Track, state: &VehicleState, lookahead: f64) -> f32 {
    let frame = VehicleFrame::new(state.world_pose(track));
    let target = track.pose(state.s + lookahead);
    let (fx, fy) = frame.local(target.x, target.y);
    let curvature = 2.0 * fy / (fx * fx + fy * fy).max(1e-9);
    (curvature / VehicleParams::default().full_lock_curvature()).clamp(-1.0, 1.0) as f32
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Confidence floor for any visible vehicle.
    pub base: f32,
    /// Confidence added at full on-screen size.
    pub gain: f32,
    /// On-screen area (px²) at which confidence saturates.
    pub reference_area: f32,
}

impl Default for DetectorConfig {
    /// The reference area puts the 0.8 brake threshold near 16 m for a
    /// 1.8 × 1.5 m rear face, leaving room to stop from 12 m/s.
    fn default() -> Self {
        Self {
            base: 0.3,
            gain: 0.69,
            reference_area: 90.0,
        }
    }
}

impl DetectorConfig {
    pub fn confidence(&self, area: f32) -> f32 {
        self.base + self.gain * (area / self.reference_area).min(1.0)
    }
}

/// Projected, frame-clipped box of the lead's rear face, if any of it is
/// in view.
pub fn lead_bbox(track: &Track, state: &VehicleState, lead: &LeadVehicle, camera: &Camera) -> Option<BBox> {
    let (fwd, right) = lead_position(track, state, lead);
    let hw = lead.width / 2.0;
    let corners = [
        (right - hw, 0.0),
        (right + hw, 0.0),
        (right - hw, lead.height),
        (right + hw, lead.height),
    ];
    let mut us = Vec::with_capacity(4);
    let mut vs = Vec::with_capacity(4);
    for (r, up) in corners {
        let (u, v) = camera.project(fwd, r, up)?;
        us.push(u);
        vs.push(v);
    }
    let fold = |xs: &[f64], lo: f64, hi: f64| {
        let a = xs.iter().copied().fold(f64::INFINITY, f64::min).max(lo);
        let b = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max).min(hi);
        (a as f32, b as f32)
    };
    let (x_min, x_max) = fold(&us, 0.0, FRAME_WIDTH as f64);
    let (y_min, y_max) = fold(&vs, 0.0, FRAME_HEIGHT as f64);
    BBox::new(x_min, y_min, x_max, y_max).ok()
}

/// Exact detections of the lead vehicle: visibility is purely geometric
/// (lighting and weather do not hide it).
pub fn truth_detections(
    track: &Track,
    state: &VehicleState,
    lead: Option<&LeadVehicle>,
    camera: &Camera,
    detector: &DetectorConfig,
) -> Vec<Detection> {
    lead.and_then(|l| lead_bbox(track, state, l, camera))
        .map(|bbox| Detection {
            class_id: VEHICLE_CLASS,
            confidence: detector.confidence(bbox.area()),
            bbox,
        })
        .into_iter()
        .collect()
}
