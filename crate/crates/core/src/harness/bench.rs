//! Inference latency measurement and the free-running dual-pipeline mode.

use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use serde::Serialize;

use crate::control::{brake_decision, steer_command, BrakeConfig, Command, Detection, SteerConfig};
use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::models::{summarize, Model};
use crate::sim::{
    advance, oracle_steering, render, truth_detections, Camera, DetectorConfig, LeadVehicle, SceneConditions, Track,
    VehicleParams, VehicleState, LOOKAHEAD,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelBench {
    pub name: String,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub params: usize,
    pub macs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub frames: usize,
    pub warmup: usize,
    pub models: Vec<ModelBench>,
    /// Median latency of the last model over the first.
    pub latency_ratio: f64,
}

/// Frames along an oracle drive of the standard track, with a lead
/// vehicle in view for part of it.
pub fn bench_frames(n: usize, seed: u64) -> Result<Vec<GrayFrame>> {
    let track = Track::highway()?;
    let conditions = SceneConditions::day_sunny(seed);
    let params = VehicleParams::default().with_speed_limit(12.0);
    let mut state = VehicleState::new(0.0, 0.0, 0.0, 12.0);
    let lead = LeadVehicle::new(25.0, 12.0);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let l = (i % 4 == 0).then_some(&lead);
        out.push(render(&track, &state, &conditions, l));
        let cmd = steer_command(oracle_steering(&track, &state, LOOKAHEAD), &SteerConfig::default())?;
        state = advance(&state, &cmd, super::DT, &track, &params);
    }
    Ok(out)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Single-threaded per-frame `predict` timing. Models are interleaved
/// frame by frame so slow drift in machine load affects all equally.
pub fn bench(models: &[&Model], frames: &[GrayFrame], warmup: usize) -> Result<BenchReport> {
    if frames.is_empty() {
        return Err(Error::config("bench needs at least one frame"));
    }
    if models.is_empty() {
        return Err(Error::config("bench needs at least one model"));
    }
    for m in models {
        for f in frames.iter().cycle().take(warmup) {
            std::hint::black_box(m.predict(f)?);
        }
    }
    let mut times = vec![Vec::with_capacity(frames.len()); models.len()];
    for f in frames {
        for (m, t) in models.iter().zip(times.iter_mut()) {
            let start = Instant::now();
            std::hint::black_box(m.predict(std::hint::black_box(f))?);
            t.push(start.elapsed().as_secs_f64() * 1e3);
        }
    }
    let mut rows = Vec::with_capacity(models.len());
    for (m, mut t) in models.iter().zip(times) {
        t.sort_by(f64::total_cmp);
        let s = summarize(m.spec())?;
        rows.push(ModelBench {
            name: m.spec().name.clone(),
            median_ms: percentile(&t, 0.5),
            p95_ms: percentile(&t, 0.95),
            params: s.total_params,
            macs: s.total_macs,
        });
    }
    let latency_ratio = rows.last().unwrap().median_ms / rows[0].median_ms;
    Ok(BenchReport {
        frames: frames.len(),
        warmup,
        models: rows,
        latency_ratio,
    })
}

/// Everything both controllers see at one tick.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub frame: GrayFrame,
    pub detections: Vec<Detection>,
}

/// Snapshots along an oracle drive on a straight road toward a slower lead.
pub fn drive_snapshots(n: usize, seed: u64) -> Result<Vec<Snapshot>> {
    let track = Track::straight(10_000.0)?;
    let conditions = SceneConditions::day_sunny(seed);
    let params = VehicleParams::default().with_speed_limit(12.0);
    let camera = Camera::default();
    let detector = DetectorConfig::default();
    let mut state = VehicleState::new(0.0, 0.2, 0.01, 12.0);
    let mut lead = LeadVehicle::new(40.0, 6.0);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(Snapshot {
            frame: render(&track, &state, &conditions, Some(&lead)),
            detections: truth_detections(&track, &state, Some(&lead), &camera, &detector),
        });
        let cmd = steer_command(oracle_steering(&track, &state, LOOKAHEAD), &SteerConfig::default())?;
        state = advance(&state, &cmd, super::DT, &track, &params);
        lead = lead.advanced(state.v, super::DT);
    }
    Ok(out)
}

fn merge(steer: Command, brake: bool) -> Command {
    if brake {
        steer.with_brake()
    } else {
        steer
    }
}

/// Lockstep reference: steer then brake on each snapshot in order.
pub fn lockstep_commands(model: &Model, snapshots: &[Snapshot], steer: &SteerConfig, brake: &BrakeConfig) -> Result<Vec<Command>> {
    snapshots
        .iter()
        .map(|s| {
            let cmd = steer_command(model.predict(&s.frame)?.clamp(-1.0, 1.0), steer)?;
            Ok(merge(cmd, brake_decision(&s.detections, brake)))
        })
        .collect()
}

/// The two controllers on separate threads over shared immutable
/// snapshots, each streaming its per-tick output; the merge matches ticks
/// by index, so the result equals [`lockstep_commands`] regardless of
/// scheduling.
pub fn concurrent_commands(
    model: Arc<Model>,
    snapshots: Arc<[Snapshot]>,
    steer: SteerConfig,
    brake: BrakeConfig,
) -> Result<Vec<Command>> {
    let (steer_tx, steer_rx) = mpsc::channel::<(usize, Result<Command>)>();
    let (brake_tx, brake_rx) = mpsc::channel::<(usize, bool)>();
    let steering = {
        let snaps = Arc::clone(&snapshots);
        thread::spawn(move || {
            for (i, s) in snaps.iter().enumerate() {
                let cmd = model.predict(&s.frame).and_then(|a| steer_command(a.clamp(-1.0, 1.0), &steer));
                if steer_tx.send((i, cmd)).is_err() {
                    break;
                }
            }
        })
    };
    let braking = {
        let snaps = Arc::clone(&snapshots);
        thread::spawn(move || {
            for (i, s) in snaps.iter().enumerate() {
                if brake_tx.send((i, brake_decision(&s.detections, &brake))).is_err() {
                    break;
                }
            }
        })
    };
    let n = snapshots.len();
    let mut steer_out: Vec<Option<Command>> = vec![None; n];
    let mut brake_out = vec![false; n];
    for (i, b) in brake_rx {
        brake_out[i] = b;
    }
    for (i, c) in steer_rx {
        steer_out[i] = Some(c?);
    }
    steering.join().map_err(|_| Error::config("steering thread panicked"))?;
    braking.join().map_err(|_| Error::config("braking thread panicked"))?;
    steer_out
        .into_iter()
        .zip(brake_out)
        .map(|(c, b)| Ok(merge(c.ok_or_else(|| Error::config("missing steering output"))?, b)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Key;
    use crate::models::{build_pilotnet_modified, build_pilotnet_original};

    #[test]
    fn report_fields() {
        let o = Model::zeros(build_pilotnet_original()).unwrap();
        let m = Model::zeros(build_pilotnet_modified()).unwrap();
        let frames = bench_frames(3, 0).unwrap();
        let r = bench(&[&o, &m], &frames, 1).unwrap();
        assert_eq!(r.models[0].params, 801_419);
        assert_eq!(r.models[1].params, 303_180);
        assert!(r.models.iter().all(|b| b.median_ms > 0.0 && b.p95_ms >= b.median_ms));
        assert!(bench(&[&o], &[], 0).is_err());
    }

    #[test]
    fn concurrent_matches_lockstep() {
        let model = Model::init(build_pilotnet_modified(), 8).unwrap();
        let snaps = drive_snapshots(60, 1).unwrap();
        let (s, b) = (SteerConfig::default(), BrakeConfig::default());
        let lock = lockstep_commands(&model, &snaps, &s, &b).unwrap();
        let conc = concurrent_commands(Arc::new(model), snaps.into(), s, b).unwrap();
        assert_eq!(lock, conc);
        assert!(lock.iter().any(|c| c.contains(Key::HardBrake)));
        assert!(lock.iter().any(|c| !c.contains(Key::HardBrake)));
    }
}
