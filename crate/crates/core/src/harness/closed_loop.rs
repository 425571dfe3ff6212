//! Lockstep closed-loop driving with intervention accounting.

use serde::{Deserialize, Serialize};

use crate::control::{brake_decision, steer_command, BrakeConfig, Key, SteerConfig};
use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::models::Model;
use crate::sim::{
    advance, collision, off_lane, oracle_steering, render, truth_detections, Camera, DetectorConfig, LeadVehicle,
    SceneConditions, Track, VehicleParams, VehicleState, LOOKAHEAD,
};

/// Simulation tick, seconds.
pub const DT: f64 = 0.1;
/// Seconds charged per intervention.
pub const INTERVENTION_SECONDS: f64 = 6.0;
const TICKS_PER_INTERVENTION: u64 = 60;

/// Percentage of a session driven autonomously, to the nearest integer,
/// floored at zero.
pub fn autonomy(interventions: u64, duration_s: f64) -> Result<u32> {
    if !(duration_s > 0.0) {
        return Err(Error::config("session duration must be positive"));
    }
    let pct = (1.0 - INTERVENTION_SECONDS * interventions as f64 / duration_s) * 100.0;
    Ok(pct.max(0.0).round() as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadSpawn {
    pub gap: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub track: String,
    pub conditions: SceneConditions,
    pub duration_s: f64,
    /// Leads enter one at a time: the first at the start, each next one
    /// after the previous is hit.
    pub traffic: Vec<LeadSpawn>,
    pub speed_limit: f64,
    pub start_s: f64,
}

impl ScenarioSpec {
    pub fn new(track: impl Into<String>, conditions: SceneConditions) -> Self {
        Self {
            track: track.into(),
            conditions,
            duration_s: 300.0,
            traffic: Vec::new(),
            speed_limit: 12.0,
            start_s: 0.0,
        }
    }

    pub fn with_duration(mut self, seconds: f64) -> Self {
        self.duration_s = seconds;
        self
    }

    pub fn with_traffic(mut self, traffic: Vec<LeadSpawn>) -> Self {
        self.traffic = traffic;
        self
    }

    /// Straight road with a stopped vehicle `gap` meters ahead.
    pub fn stopped_lead(gap: f64, conditions: SceneConditions) -> Self {
        Self::new("straight", conditions)
            .with_duration(60.0)
            .with_traffic(vec![LeadSpawn { gap, speed: 0.0 }])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::config("scenario duration must be positive"));
        }
        if !(self.speed_limit > 0.0) {
            return Err(Error::config("speed limit must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub interventions: u64,
    pub autonomy_percent: u32,
    pub collisions: u64,
    pub mean_abs_offset_m: f64,
    pub ticks: u64,
}

/// Who steers.
pub enum Driver<'a> {
    /// Pure pursuit on the true state.
    Oracle,
    /// Network prediction from the rendered frame.
    Model(&'a Model),
    /// Fixed output, for failure-mode checks.
    Constant(f32),
}

impl Driver<'_> {
    fn angle(&self, track: &Track, state: &VehicleState, frame: &GrayFrame) -> Result<f32> {
        match self {
            Driver::Oracle => Ok(oracle_steering(track, state, LOOKAHEAD)),
            Driver::Model(m) => m.predict(frame),
            Driver::Constant(a) => Ok(*a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Controllers {
    pub steer: SteerConfig,
    pub brake: BrakeConfig,
    pub detector: DetectorConfig,
}

/// Runs one session. Each tick renders the frame, steers from it, checks
/// ground-truth detections for braking when enabled, merges the commands
/// (HARD_BRAKE over SLOW over FORWARD) and advances. Leaving the lane
/// counts an intervention, recenters the car and charges six seconds of
/// session clock without moving it.
pub fn run_closed_loop(
    driver: &Driver<'_>,
    scenario: &ScenarioSpec,
    brake_enabled: bool,
    controllers: &Controllers,
) -> Result<EvalReport> {
    scenario.validate()?;
    let track = Track::by_id(&scenario.track)?;
    let params = VehicleParams::default().with_speed_limit(scenario.speed_limit);
    let camera = Camera::default();
    let budget = (scenario.duration_s / DT).round() as u64;

    let mut traffic = scenario.traffic.iter();
    let mut lead = traffic.next().map(|l| LeadVehicle::new(l.gap, l.speed));
    let mut state = VehicleState::new(scenario.start_s, 0.0, 0.0, params.v_max);
    let mut clock = 0u64;
    let mut ticks = 0u64;
    let mut interventions = 0u64;
    let mut collisions = 0u64;
    let mut slow_left = 0u32;
    let mut offset_sum = 0.0;

    while clock < budget {
        let frame = render(&track, &state, &scenario.conditions, lead.as_ref());
        let angle = driver.angle(&track, &state, &frame)?;
        let mut cmd = steer_command(angle.clamp(-1.0, 1.0), &controllers.steer)?;
        if cmd.contains(Key::Slow) {
            slow_left = slow_left.max(cmd.slow_ticks());
        }
        if slow_left > 0 {
            cmd = cmd.with_slow(slow_left);
            slow_left -= 1;
        }
        if brake_enabled {
            let dets = truth_detections(&track, &state, lead.as_ref(), &camera, &controllers.detector);
            if brake_decision(&dets, &controllers.brake) {
                cmd = cmd.with_brake();
            }
        }

        let mut next = advance(&state, &cmd, DT, &track, &params);
        if !next.is_finite() {
            return Err(Error::NonFinite("vehicle state"));
        }
        lead = lead.map(|l| l.advanced(next.v * next.psi.cos(), DT));
        ticks += 1;
        clock += 1;
        offset_sum += next.d.abs();

        if lead.as_ref().is_some_and(collision) {
            collisions += 1;
            lead = traffic.next().map(|l| LeadVehicle::new(l.gap, l.speed));
        }
        if off_lane(&next) {
            interventions += 1;
            next.d = 0.0;
            next.psi = 0.0;
            clock += TICKS_PER_INTERVENTION;
        }
        state = next;
    }

    Ok(EvalReport {
        interventions,
        autonomy_percent: autonomy(interventions, scenario.duration_s)?,
        collisions,
        mean_abs_offset_m: offset_sum / ticks.max(1) as f64,
        ticks,
    })
}
