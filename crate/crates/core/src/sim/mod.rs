//! Procedural lane-following world.

pub mod camera;
pub mod oracle;
pub mod render;
pub mod track;
pub mod vehicle;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use camera::{Camera, VehicleFrame};
pub use oracle::{oracle_steering, truth_detections, DetectorConfig, LOOKAHEAD};
pub use render::render;
pub use track::{Pose, Segment, Track};
pub use vehicle::{advance, VehicleParams, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeOfDay {
    Day,
    Night,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    Sunny,
    Rain,
    ClearSky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SceneConditions {
    pub time: TimeOfDay,
    pub weather: Weather,
    pub seed: u64,
}

impl SceneConditions {
    pub fn new(time: TimeOfDay, weather: Weather, seed: u64) -> Self {
        Self { time, weather, seed }
    }

    pub fn day_sunny(seed: u64) -> Self {
        Self::new(TimeOfDay::Day, Weather::Sunny, seed)
    }
}

impl FromStr for TimeOfDay {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "day" => Ok(TimeOfDay::Day),
            "night" => Ok(TimeOfDay::Night),
            other => Err(Error::config(format!("unknown time of day '{other}'"))),
        }
    }
}

impl FromStr for Weather {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sunny" => Ok(Weather::Sunny),
            "rain" => Ok(Weather::Rain),
            "clear" | "clear_sky" | "clear-sky" => Ok(Weather::ClearSky),
            other => Err(Error::config(format!("unknown weather '{other}'"))),
        }
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeOfDay::Day => "day",
            TimeOfDay::Night => "night",
        })
    }
}

impl fmt::Display for Weather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weather::Sunny => "sunny",
            Weather::Rain => "rain",
            Weather::ClearSky => "clear_sky",
        })
    }
}

/// Parses `time,weather`, e.g. `day,sunny` or `night,clear_sky`.
pub fn parse_conditions(text: &str, seed: u64) -> Result<SceneConditions> {
    let (t, w) = text
        .split_once(',')
        .ok_or_else(|| Error::config(format!("conditions '{text}' must look like 'day,sunny'")))?;
    Ok(SceneConditions::new(t.parse()?, w.parse()?, seed))
}

/// A vehicle ahead in the ego lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadVehicle {
    /// Distance ahead along the lane, meters.
    pub gap: f64,
    pub speed: f64,
    pub width: f64,
    pub height: f64,
}

impl LeadVehicle {
    pub fn new(gap: f64, speed: f64) -> Self {
        Self {
            gap,
            speed,
            width: 1.8,
            height: 1.5,
        }
    }

    /// Gap after `dt` seconds with the ego vehicle moving along the lane
    /// at `ego_speed`.
    pub fn advanced(&self, ego_speed: f64, dt: f64) -> Self {
        Self {
            gap: self.gap + (self.speed - ego_speed) * dt,
            ..*self
        }
    }
}

/// More than one meter from the lane center.
pub fn off_lane(state: &VehicleState) -> bool {
    state.d.abs() > 1.0
}

pub fn collision(lead: &LeadVehicle) -> bool {
    lead.gap <= 0.0
}
