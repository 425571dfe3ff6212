use super::track::Pose;
use crate::frame::{FRAME_HEIGHT, FRAME_WIDTH};

/// Forward-looking pinhole camera mounted above the vehicle origin.
/// Pixel `(u, v)` samples the ray through the pixel center
/// `(u + 0.5, v + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub height: f64,
    /// Downward tilt of the optical axis, radians.
    pub tilt: f64,
}

impl Default for Camera {
    /// 90° horizontal field of view at 160×120, 1.2 m high, pitched 5° down.
    fn default() -> Self {
        let cx = FRAME_WIDTH as f64 / 2.0;
        Self {
            focal: cx / 45f64.to_radians().tan(),
            cx,
            cy: FRAME_HEIGHT as f64 / 2.0,
            height: 1.2,
            tilt: 5f64.to_radians(),
        }
    }
}

impl Camera {
    /// Distance scale `t` and forward ground distance for image row
    /// coordinate `yv`, or `None` at or above the horizon.
    pub fn row_ground(&self, yv: f64) -> Option<(f64, f64)> {
        let yc = (yv - self.cy) / self.focal;
        let (st, ct) = self.tilt.sin_cos();
        let denom = st + yc * ct;
        if denom <= 1e-9 {
            return None;
        }
        let t = self.height / denom;
        Some((t, t * (ct - yc * st)))
    }

    /// Ground point `(forward, right)` seen through image point `(xu, yv)`.
    pub fn ground_ray(&self, xu: f64, yv: f64) -> Option<(f64, f64)> {
        let (t, fwd) = self.row_ground(yv)?;
        Some((fwd, t * (xu - self.cx) / self.focal))
    }

    /// Image coordinates of a vehicle-frame point (`forward`, `right`,
    /// height `up`), if it is in front of the camera.
    pub fn project(&self, forward: f64, right: f64, up: f64) -> Option<(f64, f64)> {
        let (st, ct) = self.tilt.sin_cos();
        let dz = up - self.height;
        let depth = forward * ct - dz * st;
        if depth <= 1e-6 {
            return None;
        }
        let rise = forward * st + dz * ct;
        Some((self.cx + self.focal * right / depth, self.cy - self.focal * rise / depth))
    }

    /// Image row of the horizon line.
    pub fn horizon_row(&self) -> f64 {
        self.cy - self.focal * self.tilt.tan()
    }
}

/// Transform from world coordinates into a vehicle frame (forward, right).
#[derive(Debug, Clone, Copy)]
pub struct VehicleFrame {
    x: f64,
    y: f64,
    cos: f64,
    sin: f64,
}

impl VehicleFrame {
    pub fn new(pose: Pose) -> Self {
        let (sin, cos) = pose.heading.sin_cos();
        Self {
            x: pose.x,
            y: pose.y,
            cos,
            sin,
        }
    }

    pub fn local(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.x, y - self.y);
        (dx * self.cos + dy * self.sin, dx * self.sin - dy * self.cos)
    }
}
