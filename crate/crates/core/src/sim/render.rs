//! Flat-shaded grayscale camera view of the lane.
//!
//! Each image row below the horizon maps to one forward ground distance.
//! The centerline is sampled every meter ahead of the vehicle and
//! intersected with that distance, which gives the row's lane-center
//! offset, arc length and road direction. Pixels are then classified by
//! their perpendicular offset from the centerline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::camera::{Camera, VehicleFrame};
use super::oracle::lead_position;
use super::track::Track;
use super::vehicle::VehicleState;
use super::{LeadVehicle, SceneConditions, TimeOfDay, Weather};
use crate::frame::{GrayFrame, FRAME_HEIGHT, FRAME_WIDTH};

const SKY: f64 = 200.0;
const RAIN_SKY: f64 = 170.0;
const GRASS: f64 = 140.0;
const ROAD: f64 = 70.0;
const MARKING: f64 = 235.0;
const PUDDLE: f64 = 105.0;
const PUDDLE_MARKING: f64 = 140.0;
const LEAD: f64 = 25.0;

const SHOULDER: f64 = 1.0;
const DASH_PERIOD: f64 = 6.0;
const DASH_ON: f64 = 3.0;
const SAMPLE_BEHIND: f64 = 5.0;
const SAMPLE_AHEAD: f64 = 260.0;

const HEADLIGHT_RANGE: f64 = 25.0;
const HEADLIGHT_HALF_ANGLE: f64 = 0.55;
const NIGHT_ATTENUATION: f64 = 0.25;
const RAIN_CONTRAST: f64 = 0.7;
const PUDDLE_CELL: f64 = 8.0;

#[derive(Debug, Clone, Copy)]
struct Puddle {
    s: f64,
    e: f64,
    a: f64,
    b: f64,
}

/// Puddles of one 8 m cell. Deterministic in `(seed, cell)`.
fn cell_puddles(seed: u64, cell: i64, out: &mut Vec<Puddle>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (cell as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let n = rng.random_range(0..=2);
    for _ in 0..n {
        out.push(Puddle {
            s: (cell as f64 + rng.random::<f64>()) * PUDDLE_CELL,
            e: rng.random_range(-2.0..2.0),
            a: rng.random_range(1.5..3.5),
            b: rng.random_range(0.4..1.1),
        });
    }
}

#[derive(Debug, Clone, Copy)]
struct RowGeometry {
    /// Ground meters per pixel column at this row.
    scale: f64,
    forward: f64,
    center: f64,
    s: f64,
    cos_dir: f64,
}

fn row_geometry(samples: &[(f64, f64, f64)], forward: f64, scale: f64) -> Option<RowGeometry> {
    samples.windows(2).find_map(|w| {
        let ((f0, r0, s0), (f1, r1, s1)) = (w[0], w[1]);
        if !(f0 <= forward && forward < f1) {
            return None;
        }
        let k = (forward - f0) / (f1 - f0);
        let (df, dr) = (f1 - f0, r1 - r0);
        Some(RowGeometry {
            scale,
            forward,
            center: r0 + k * dr,
            s: s0 + k * (s1 - s0),
            cos_dir: df / df.hypot(dr),
        })
    })
}

/// Renders the camera frame for `state` on `track`.
pub fn render(track: &Track, state: &VehicleState, conditions: &SceneConditions, lead: Option<&LeadVehicle>) -> GrayFrame {
    render_with(track, state, conditions, lead, &Camera::default())
}

pub fn render_with(
    track: &Track,
    state: &VehicleState,
    conditions: &SceneConditions,
    lead: Option<&LeadVehicle>,
    camera: &Camera,
) -> GrayFrame {
    let frame = VehicleFrame::new(state.world_pose(track));
    let n = (SAMPLE_BEHIND + SAMPLE_AHEAD) as usize;
    let samples: Vec<(f64, f64, f64)> = (0..=n)
        .map(|k| {
            let s = state.s - SAMPLE_BEHIND + k as f64;
            let p = track.pose(s);
            let (f, r) = frame.local(p.x, p.y);
            (f, r, track.wrap(s))
        })
        .collect();

    let rain = conditions.weather == Weather::Rain;
    let night = conditions.time == TimeOfDay::Night;
    let mut puddles = Vec::new();
    if rain {
        let lo = ((state.s - SAMPLE_BEHIND) / PUDDLE_CELL).floor() as i64 - 1;
        let hi = ((state.s + SAMPLE_AHEAD) / PUDDLE_CELL).ceil() as i64 + 1;
        for c in lo..=hi {
            let wrapped = (track.wrap(c as f64 * PUDDLE_CELL) / PUDDLE_CELL).round() as i64;
            cell_puddles(conditions.seed, wrapped, &mut puddles);
        }
    }

    let half = track.lane_width() / 2.0;
    let lead_box = lead.and_then(|l| super::oracle::lead_bbox(track, state, l, camera));
    let lead_depth = lead.map(|l| lead_position(track, state, l).0);

    let mut out = GrayFrame::filled(FRAME_WIDTH, FRAME_HEIGHT, 0);
    for row in 0..FRAME_HEIGHT {
        let yv = row as f64 + 0.5;
        // Ground rows where the road is out of view get an infinitely
        // distant centerline, so every pixel classifies as grass.
        let geom = camera.row_ground(yv).map(|(t, fwd)| {
            row_geometry(&samples, fwd, t / camera.focal).unwrap_or(RowGeometry {
                scale: t / camera.focal,
                forward: fwd,
                center: f64::INFINITY,
                s: 0.0,
                cos_dir: 1.0,
            })
        });
        let row_puddles: Vec<Puddle> = match geom {
            Some(g) if rain => puddles.iter().filter(|p| (g.s - p.s).abs() <= p.a).copied().collect(),
            _ => Vec::new(),
        };
        for col in 0..FRAME_WIDTH {
            let xu = col as f64 + 0.5;
            let mut value = match geom {
                None => {
                    let sky = if rain { RAIN_SKY } else { SKY };
                    if night {
                        sky * NIGHT_ATTENUATION
                    } else {
                        sky
                    }
                }
                Some(g) => {
                    let lateral = g.scale * (xu - camera.cx);
                    let e = (lateral - g.center) * g.cos_dir;
                    let mark_hw = (0.6 * g.scale).max(0.1);
                    let on_boundary = (e.abs() - half).abs() <= mark_hw;
                    let on_dash = e.abs() <= mark_hw && g.s.rem_euclid(DASH_PERIOD) < DASH_ON;
                    let marking = on_boundary || on_dash;
                    let on_road = e.abs() <= half + SHOULDER;
                    let in_puddle = on_road
                        && row_puddles.iter().any(|p| {
                            let (ds, de) = ((g.s - p.s) / p.a, (e - p.e) / p.b);
                            ds * ds + de * de <= 1.0
                        });
                    let mut v = match (marking, on_road, in_puddle) {
                        (true, _, true) => PUDDLE_MARKING,
                        (true, _, false) => MARKING,
                        (false, true, true) => PUDDLE,
                        (false, true, false) => ROAD,
                        (false, false, _) => GRASS,
                    };
                    if night {
                        let lit = g.forward <= HEADLIGHT_RANGE && lateral.abs() <= g.forward * HEADLIGHT_HALF_ANGLE.tan();
                        if !lit {
                            v *= NIGHT_ATTENUATION;
                        }
                    }
                    v
                }
            };
            if let Some(b) = lead_box {
                let yv32 = yv as f32;
                let xu32 = xu as f32;
                if (b.x_min..b.x_max).contains(&xu32) && (b.y_min..b.y_max).contains(&yv32) {
                    let far = lead_depth.is_some_and(|d| d > HEADLIGHT_RANGE);
                    value = if night && far { LEAD * NIGHT_ATTENUATION } else { LEAD };
                }
            }
            if rain {
                value = 128.0 + RAIN_CONTRAST * (value - 128.0);
            }
            out.set(col, row, value.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}
