use serde::{Deserialize, Serialize};

use super::track::{Pose, Track};
use crate::control::Command;

/// Lane-relative vehicle state. Positive `d` is right of the centerline,
/// positive `psi` heads to the right of the lane direction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub s: f64,
    pub d: f64,
    pub psi: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub wheelbase: f64,
    /// Road-wheel angle at full lock, radians.
    pub max_steer: f64,
    pub v_max: f64,
    pub drag: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 2.5,
            max_steer: 0.61,
            v_max: 30.0,
            drag: 0.5,
        }
    }
}

impl VehicleParams {
    /// Path curvature at full lock.
    pub fn full_lock_curvature(&self) -> f64 {
        self.max_steer.tan() / self.wheelbase
    }

    pub fn with_speed_limit(mut self, limit: f64) -> Self {
        self.v_max = self.v_max.min(limit);
        self
    }
}

impl VehicleState {
    pub fn new(s: f64, d: f64, psi: f64, v: f64) -> Self {
        Self { s, d, psi, v }
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.d.is_finite() && self.psi.is_finite() && self.v.is_finite()
    }

    /// World pose of the vehicle: centerline point offset by `d` along the
    /// right normal, heading rotated clockwise by `psi`.
    pub fn world_pose(&self, track: &Track) -> Pose {
        let c = track.pose(self.s);
        let (sn, cs) = c.heading.sin_cos();
        Pose {
            x: c.x + self.d * sn,
            y: c.y - self.d * cs,
            heading: c.heading - self.psi,
        }
    }
}

/// One kinematic step of length `dt` seconds.
pub fn advance(state: &VehicleState, command: &Command, dt: f64, track: &Track, params: &VehicleParams) -> VehicleState {
    let accel = command.pedal().unwrap_or(-params.drag);
    let v = (state.v + accel * dt).clamp(0.0, params.v_max);
    let steer = f64::from(command.steer()).clamp(-1.0, 1.0);
    let yaw_rate = v / params.wheelbase * (params.max_steer * steer).tan();
    let psi = state.psi + yaw_rate * dt - track.curvature(state.s) * v * dt;
    let d = state.d + v * psi.sin() * dt;
    let s = track.wrap(state.s + v * psi.cos() * dt);
    VehicleState { s, d, psi, v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{steer_command, SteerConfig};
    use crate::sim::track::Segment;

    fn steer(a: f32) -> Command {
        let cfg = SteerConfig {
            dead_zone: 0.0,
            slow_threshold: 1.0,
            ..Default::default()
        };
        steer_command(a, &cfg).unwrap()
    }

    #[test]
    fn straight_centered_stays_centered() {
        let t = Track::straight(1000.0).unwrap();
        let mut st = VehicleState::new(0.0, 0.0, 0.0, 12.0);
        for _ in 0..100 {
            st = advance(&st, &Command::forward(), 0.1, &t, &VehicleParams::default());
            assert_eq!(st.d, 0.0);
            assert_eq!(st.psi, 0.0);
        }
        assert!(st.v <= 30.0 && st.s > 100.0);
    }

    #[test]
    fn stopped_car_stays_put() {
        let t = Track::highway().unwrap();
        let st0 = VehicleState::new(40.0, 0.3, 0.02, 0.0);
        let st = advance(&st0, &Command::idle(), 0.1, &t, &VehicleParams::default());
        assert_eq!(st, st0);
    }

    #[test]
    fn accelerations() {
        let t = Track::straight(1000.0).unwrap();
        let p = VehicleParams::default();
        let st = VehicleState::new(0.0, 0.0, 0.0, 10.0);
        let v = |c: Command| advance(&st, &c, 0.1, &t, &p).v;
        assert!((v(Command::forward()) - 10.2).abs() < 1e-12);
        assert!((v(Command::forward().with_slow(1)) - 9.6).abs() < 1e-12);
        assert!((v(Command::forward().with_brake()) - 9.2).abs() < 1e-12);
        assert!((v(Command::idle()) - 9.95).abs() < 1e-12);
        let fast = VehicleState::new(0.0, 0.0, 0.0, 29.9);
        assert_eq!(advance(&fast, &Command::forward(), 0.1, &t, &p).v, 30.0);
    }

    #[test]
    fn steady_state_steer_tracks_arc() {
        let kappa = 1.0 / 40.0;
        let t = Track::new("arc", vec![Segment { length: 5000.0, curvature: kappa }], 3.5, false).unwrap();
        let p = VehicleParams::default();
        let a = ((kappa * p.wheelbase).atan() / p.max_steer) as f32;
        let mut st = VehicleState::new(0.0, 0.0, 0.0, 10.0);
        let p = p.with_speed_limit(10.0);
        for _ in 0..100 {
            st = advance(&st, &steer(a), 0.1, &t, &p);
            assert!(st.d.abs() < 0.01, "d {}", st.d);
        }
    }

    #[test]
    fn right_steer_moves_right() {
        let t = Track::straight(1000.0).unwrap();
        let mut st = VehicleState::new(0.0, 0.0, 0.0, 10.0);
        for _ in 0..5 {
            st = advance(&st, &steer(0.3), 0.1, &t, &VehicleParams::default());
        }
        assert!(st.d > 0.0 && st.psi > 0.0);
    }

    #[test]
    fn world_pose_offsets_right() {
        let t = Track::straight(100.0).unwrap();
        let p = VehicleState::new(10.0, 1.0, 0.1, 0.0).world_pose(&t);
        assert!((p.x - 10.0).abs() < 1e-12 && (p.y + 1.0).abs() < 1e-12);
        assert!((p.heading + 0.1).abs() < 1e-12);
    }
}
