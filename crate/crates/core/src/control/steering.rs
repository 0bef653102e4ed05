//! Front-rudder steering and line-sensor path following.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::pid::{pid_update, PidGains, PidState};
use crate::error::ParamError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteeringConfig {
    /// Yaw rate per unit of `sin(gamma) * Vp` (1/m).
    pub k_steer: f64,
    /// Rudder deflection limit (rad).
    pub gamma_max: f64,
    /// Distance from the body origin to the line sensor (m).
    pub lookahead_m: f64,
    /// Half of the line sensor's width (m).
    pub sensor_half_span: f64,
    /// PD acting on the sensed lateral offset; output in rad.
    pub lateral_pd: PidGains,
}

impl Default for SteeringConfig {
    fn default() -> Self {
        let gamma_max = FRAC_PI_4;
        Self {
            // 0.5 m turning radius at full rudder
            k_steer: 1.0 / (0.5 * gamma_max.sin()),
            gamma_max,
            lookahead_m: 0.15,
            // 128 cells at 1 mm pitch
            sensor_half_span: 0.064,
            lateral_pd: PidGains {
                kp: 20.0,
                ki: 0.0,
                kd: 0.5,
                output_min: -gamma_max,
                output_max: gamma_max,
                integral_limit: 0.0,
            },
        }
    }
}

impl SteeringConfig {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.gamma_max > 0.0 && self.gamma_max <= FRAC_PI_3) {
            return Err(ParamError::new("gamma_max", "must lie in (0, pi/3]"));
        }
        if !(self.k_steer > 0.0 && self.k_steer.is_finite()) {
            return Err(ParamError::new("k_steer", "must be > 0"));
        }
        if !(self.lookahead_m >= 0.0 && self.lookahead_m.is_finite()) {
            return Err(ParamError::new("lookahead_m", "must be >= 0"));
        }
        if !(self.sensor_half_span > 0.0) {
            return Err(ParamError::new("sensor_half_span", "must be > 0"));
        }
        self.lateral_pd
            .validate()
            .map_err(|e| e.in_section("lateral_pd"))
    }

    /// Radius of the tightest turn at full rudder.
    pub fn min_turn_radius(&self) -> f64 {
        1.0 / (self.k_steer * self.gamma_max.sin())
    }
}

/// Yaw rate produced by the rudder: the lateral share `sin(gamma)` of the
/// rudder drag turns the body in proportion to the forward speed.
pub fn rudder_yaw_rate(gamma: f64, vp: f64, cfg: &SteeringConfig) -> f64 {
    cfg.k_steer * gamma.sin() * vp
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    /// Lemniscate of Gerono, `(a cos s, a sin s cos s)`.
    #[default]
    FigureEight,
    /// Straight line along +x through the center.
    Line,
    Circle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathDef {
    pub kind: PathKind,
    /// Half-length of the figure-eight, radius of the circle, or metres
    /// per unit parameter along the line.
    pub scale_m: f64,
    pub center: [f64; 2],
}

impl Default for PathDef {
    fn default() -> Self {
        Self {
            kind: PathKind::FigureEight,
            // tightest bend of the lemniscate is 0.209 * scale, which must
            // stay clear of the rudder's 0.5 m minimum radius
            scale_m: 4.0,
            center: [0.0, 0.0],
        }
    }
}

impl PathDef {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.scale_m > 0.0 && self.scale_m.is_finite()) {
            return Err(ParamError::new("scale_m", "must be > 0"));
        }
        Ok(())
    }

    pub fn point(&self, s: f64) -> [f64; 2] {
        let a = self.scale_m;
        let [cx, cy] = self.center;
        match self.kind {
            PathKind::FigureEight => [cx + a * s.cos(), cy + a * s.sin() * s.cos()],
            PathKind::Line => [cx + a * s, cy],
            PathKind::Circle => [cx + a * s.cos(), cy + a * s.sin()],
        }
    }

    /// Derivative of [`PathDef::point`] with respect to the parameter.
    pub fn tangent(&self, s: f64) -> [f64; 2] {
        let a = self.scale_m;
        match self.kind {
            PathKind::FigureEight => [-a * s.sin(), a * (2.0 * s).cos()],
            PathKind::Line => [a, 0.0],
            PathKind::Circle => [-a * s.sin(), a * s.cos()],
        }
    }

    /// Parameter advance of one full lap, `None` for open paths.
    pub fn lap_span(&self) -> Option<f64> {
        match self.kind {
            PathKind::FigureEight | PathKind::Circle => Some(TAU),
            PathKind::Line => None,
        }
    }

    /// Pose at parameter `s`, heading along the direction of travel.
    pub fn pose_at(&self, s: f64) -> Pose {
        let [x, y] = self.point(s);
        let [tx, ty] = self.tangent(s);
        Pose {
            x,
            y,
            heading: ty.atan2(tx),
        }
    }

    /// Unsigned curvature at parameter `s` (1/m).
    pub fn curvature(&self, s: f64) -> f64 {
        let h = 1e-4;
        let [tx, ty] = self.tangent(s);
        let [ax, ay] = self.tangent(s + h);
        let [bx, by] = self.tangent(s - h);
        let (ddx, ddy) = ((ax - bx) / (2.0 * h), (ay - by) / (2.0 * h));
        (tx * ddy - ty * ddx).abs() / (tx * tx + ty * ty).powf(1.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("path lost: lateral offset {offset:.4} m exceeds sensor half-span {half_span:.4} m")]
pub struct PathLost {
    pub offset: f64,
    pub half_span: f64,
}

/// Tracking state of the line follower.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FollowerState {
    /// Path parameter of the point last seen under the sensor.
    pub s: f64,
    /// Total parameter advance since the start.
    pub progress: f64,
    pub last_offset: f64,
    pd: PidState,
}

impl FollowerState {
    pub fn at(s: f64) -> Self {
        Self {
            s,
            ..Self::default()
        }
    }
}

// Search half-width around the last tracked parameter. Small enough that the
// follower never jumps to the other branch at the figure-eight crossing.
const SEARCH_HALF_WIDTH: f64 = 0.3;

fn nearest_parameter(path: &PathDef, around: f64, q: [f64; 2]) -> f64 {
    let dist2 = |s: f64| {
        let [px, py] = path.point(s);
        (px - q[0]).powi(2) + (py - q[1]).powi(2)
    };
    let samples = 60;
    let lo = around - SEARCH_HALF_WIDTH;
    let step = 2.0 * SEARCH_HALF_WIDTH / samples as f64;
    let mut best = around;
    let mut best_d = dist2(around);
    for k in 0..=samples {
        let s = lo + step * k as f64;
        let d = dist2(s);
        if d < best_d {
            best = s;
            best_d = d;
        }
    }
    // golden-section refinement inside the winning cell
    let (mut a, mut b) = (best - step, best + step);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    for _ in 0..40 {
        if dist2(c) < dist2(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    0.5 * (a + b)
}

/// Signed lateral offset of the path under the line sensor: positive when
/// the path lies to the left of the robot.
pub fn sensed_offset(
    pose: &Pose,
    path: &PathDef,
    cfg: &SteeringConfig,
    state: &mut FollowerState,
) -> f64 {
    let (sin_h, cos_h) = pose.heading.sin_cos();
    let q = [
        pose.x + cfg.lookahead_m * cos_h,
        pose.y + cfg.lookahead_m * sin_h,
    ];
    let s = nearest_parameter(path, state.s, q);
    state.progress += s - state.s;
    state.s = s;
    let [px, py] = path.point(s);
    (px - q[0]) * -sin_h + (py - q[1]) * cos_h
}

/// One follower update: sense the path, run the lateral PD and return the
/// rudder command, clamped to `gamma_max`.
pub fn follow_step(
    pose: &Pose,
    path: &PathDef,
    cfg: &SteeringConfig,
    state: &mut FollowerState,
    dt: f64,
) -> Result<f64, PathLost> {
    let offset = sensed_offset(pose, path, cfg, state);
    state.last_offset = offset;
    if offset.abs() > cfg.sensor_half_span {
        return Err(PathLost {
            offset,
            half_span: cfg.sensor_half_span,
        });
    }
    let gamma = pid_update(&cfg.lateral_pd, &mut state.pd, offset, dt);
    Ok(gamma.clamp(-cfg.gamma_max, cfg.gamma_max))
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}
