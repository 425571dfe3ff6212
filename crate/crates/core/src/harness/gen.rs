//! Synthetic training data from perturbed oracle driving.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::control::{steer_command, SteerConfig};
use crate::data::{balance, balanced_len, histogram, mirror_expand, split, Dataset, Sample};
use crate::error::{Error, Result};
use crate::sim::{
    advance, oracle_steering, render, SceneConditions, TimeOfDay, Track, VehicleParams, VehicleState, Weather, LOOKAHEAD,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Final dataset size after balancing and mirroring.
    pub samples: usize,
    /// Raw samples generated per final sample.
    pub raw_factor: f64,
    pub tracks: Vec<String>,
    pub conditions: Vec<(TimeOfDay, Weather)>,
    pub bins: usize,
    pub speed: f64,
    pub episode_ticks: usize,
    pub record_every: usize,
    /// Start-pose perturbation bounds.
    pub max_offset: f64,
    pub max_heading: f64,
    /// Ornstein-Uhlenbeck steering noise: stationary std and reversion rate.
    pub noise_std: f64,
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            samples: 5000,
            raw_factor: 2.0,
            tracks: vec!["highway".into(), "city".into()],
            conditions: vec![
                (TimeOfDay::Day, Weather::Sunny),
                (TimeOfDay::Day, Weather::Rain),
                (TimeOfDay::Night, Weather::ClearSky),
            ],
            bins: 25,
            speed: 12.0,
            episode_ticks: 120,
            record_every: 2,
            max_offset: 0.8,
            max_heading: 0.08,
            noise_std: 0.12,
            noise_rate: 1.0,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::config("need at least 2 samples"));
        }
        if self.tracks.is_empty() || self.conditions.is_empty() {
            return Err(Error::config("need at least one track and one condition"));
        }
        if !(self.raw_factor >= 1.0) || self.record_every == 0 || self.episode_ticks == 0 {
            return Err(Error::config("raw_factor >= 1, record_every > 0 and episode_ticks > 0 required"));
        }
        Ok(())
    }

    pub fn raw_count(&self) -> usize {
        (self.samples as f64 * self.raw_factor).ceil() as usize
    }
}

/// Raw labelled frames: episodes start from a perturbed pose, steer with
/// the oracle plus correlated noise, and record the clean oracle label.
pub fn generate_raw(config: &GenConfig) -> Result<Dataset> {
    config.validate()?;
    let tracks = config.tracks.iter().map(|t| Track::by_id(t)).collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = VehicleParams::default().with_speed_limit(config.speed);
    let steer_cfg = SteerConfig {
        dead_zone: 0.0,
        slow_threshold: 1.0,
        ..SteerConfig::default()
    };
    let target = config.raw_count();
    let mut out = Dataset::new(Vec::new())?;
    let sigma = config.noise_std * (2.0 * config.noise_rate).sqrt();
    let dt = super::closed_loop::DT;
    let mut episode = 0usize;

    while out.len() < target {
        let track = &tracks[episode % tracks.len()];
        let (time, weather) = config.conditions[(episode / tracks.len()) % config.conditions.len()];
        episode += 1;
        let conditions = SceneConditions::new(time, weather, rng.random());
        let s0 = if track.is_loop() { rng.random_range(0.0..track.length()) } else { 0.0 };
        let mut state = VehicleState::new(
            s0,
            rng.random_range(-config.max_offset..=config.max_offset),
            rng.random_range(-config.max_heading..=config.max_heading),
            config.speed,
        );
        let mut noise = 0.0f64;
        for tick in 0..config.episode_ticks {
            let label = oracle_steering(track, &state, LOOKAHEAD);
            if tick % config.record_every == 0 {
                out.push(Sample::new(render(track, &state, &conditions, None), label)?)?;
                if out.len() == target {
                    break;
                }
            }
            let z: f64 = rng.sample(StandardNormal);
            noise += -config.noise_rate * noise * dt + sigma * dt.sqrt() * z;
            let applied = (f64::from(label) + noise).clamp(-1.0, 1.0) as f32;
            state = advance(&state, &steer_command(applied, &steer_cfg)?, dt, track, &params);
            if state.d.abs() > 1.5 {
                break;
            }
        }
    }
    Ok(out)
}

/// Smallest per-bin cap whose balanced size reaches `target`.
pub fn cap_for_target(hist: &[usize], target: usize) -> Option<usize> {
    let max = hist.iter().copied().max()?;
    if balanced_len(hist, max) < target {
        return None;
    }
    let (mut lo, mut hi) = (1, max);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if balanced_len(hist, mid) >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}

/// Balances `raw` to exactly `samples / 2` frames (order preserved) and
/// mirror-expands to `samples`.
pub fn balance_and_mirror(raw: &Dataset, samples: usize, bins: usize, seed: u64) -> Result<Dataset> {
    let half = samples / 2;
    let hist = histogram(raw, bins);
    let cap = cap_for_target(&hist, half)
        .ok_or_else(|| Error::config(format!("{} raw samples cannot yield {half} balanced ones", raw.len())))?;
    let balanced = balance(raw, bins, cap, seed)?;
    let (exact, _) = split(&balanced, half, 0, seed ^ 0x5eed)?;
    Ok(mirror_expand(&exact))
}

pub fn generate(config: &GenConfig) -> Result<Dataset> {
    let raw = generate_raw(config)?;
    balance_and_mirror(&raw, config.samples, config.bins, config.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;

    fn small() -> GenConfig {
        GenConfig {
            samples: 60,
            seed: 3,
            ..GenConfig::default()
        }
    }

    #[test]
    fn sizes_and_provenance() {
        let d = generate(&small()).unwrap();
        assert_eq!(d.len(), 60);
        assert_eq!(d.provenance(), &[Provenance::Raw, Provenance::Balanced, Provenance::Mirrored]);
        let sum: f32 = d.angles().iter().sum();
        assert!(sum.abs() < 1e-4);
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
    }

    #[test]
    fn cap_search() {
        let h = [1, 50, 500, 40, 2];
        let c = cap_for_target(&h, 100).unwrap();
        assert!(balanced_len(&h, c) >= 100 && balanced_len(&h, c - 1) < 100);
        assert_eq!(cap_for_target(&h, 10_000), None);
    }

    #[test]
    fn synthetic_straight_heavy_set_reduces_like_collection() {
        // 100k samples, 70% straight: capping leaves ~40k.
        let mut hist = vec![0usize; 25];
        hist[12] = 70_000;
        for (i, h) in hist.iter_mut().enumerate() {
            if i != 12 {
                *h = 30_000 / 24;
            }
        }
        let c = cap_for_target(&hist, 40_000).unwrap();
        assert_eq!(c, 10_000);
        assert_eq!(balanced_len(&hist, c), 40_000);
    }
}
