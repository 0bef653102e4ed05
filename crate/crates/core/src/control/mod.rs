//! Two-loop velocity control and path following.
//!
//! The outer loop is a PID whose gains are adjusted online by fuzzy
//! inference; it maps the speed error to a commanded inward swing speed.
//! The inner motor loop is represented by [`motor::MotorModel`]. Steering is
//! done with the front rudder, driven by a lateral PD on a line sensor.

pub mod fuzzy;
pub mod motor;
pub mod pid;
pub mod steering;

use serde::{Deserialize, Serialize};

use crate::error::ParamError;
pub use fuzzy::{fuzzy_adjust, FuzzyConfig, GainDelta, Label, RuleTable};
pub use motor::{motor_track, MotorModel};
pub use pid::{pid_update, PidGains, PidState};
pub use steering::{
    follow_step, rudder_yaw_rate, FollowerState, PathDef, PathKind, PathLost, Pose, SteeringConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub fuzzy: FuzzyConfig,
    pub motor: MotorModel,
    pub steering: SteeringConfig,
    /// Outer-loop sample period (s).
    pub sample_s: f64,
    /// Length of the trailing average used as the speed measurement (s).
    pub measure_window_s: f64,
    /// Outward swing speed held while the loop is closed (rad/s).
    pub omega_out: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            fuzzy: FuzzyConfig::default(),
            motor: MotorModel::default(),
            steering: SteeringConfig::default(),
            sample_s: 0.01,
            measure_window_s: 0.1,
            omega_out: 0.78,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ParamError> {
        self.fuzzy.validate().map_err(|e| e.in_section("fuzzy"))?;
        self.motor.validate().map_err(|e| e.in_section("motor"))?;
        self.steering
            .validate()
            .map_err(|e| e.in_section("steering"))?;
        if !(self.sample_s > 0.0 && self.sample_s.is_finite()) {
            return Err(ParamError::new("sample_s", "must be > 0"));
        }
        if !(self.measure_window_s > 0.0 && self.measure_window_s.is_finite()) {
            return Err(ParamError::new("measure_window_s", "must be > 0"));
        }
        if !(self.omega_out > 0.0 && self.omega_out.is_finite()) {
            return Err(ParamError::new("omega_out", "must be > 0"));
        }
        Ok(())
    }

    pub fn command_range(&self) -> (f64, f64) {
        let g = &self.fuzzy.base_gains;
        (g.output_min, g.output_max)
    }
}

/// State of the outer velocity loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityControllerState {
    pub pid: PidState,
    pub last_delta: GainDelta,
    pub last_command: f64,
}

impl VelocityControllerState {
    /// Start from the slowest swing in the command range.
    pub fn new(cfg: &ControllerConfig) -> Self {
        let (lo, _) = cfg.command_range();
        Self {
            pid: PidState::with_integral(lo),
            last_delta: GainDelta::default(),
            last_command: lo,
        }
    }
}

/// One outer-loop update: fuzzy-adjust the gains from the error and its
/// rate, then run the PID. Returns the commanded inward swing speed.
pub fn velocity_controller_step(
    target_v: f64,
    measured_v: f64,
    dt: f64,
    cfg: &ControllerConfig,
    state: &mut VelocityControllerState,
) -> f64 {
    let error = target_v - measured_v;
    let derror = match state.pid.prev_error {
        Some(prev) if dt > 0.0 => (error - prev) / dt,
        _ => 0.0,
    };
    let delta = fuzzy::fuzzy_adjust_unchecked(error, derror, &cfg.fuzzy);
    let base = &cfg.fuzzy.base_gains;
    let gains = PidGains {
        kp: (base.kp + delta.dkp).max(0.0),
        ki: (base.ki + delta.dki).max(0.0),
        kd: (base.kd + delta.dkd).max(0.0),
        ..*base
    };
    let command = pid_update(&gains, &mut state.pid, error, dt);
    state.last_delta = delta;
    state.last_command = command;
    command
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_error_holds_integral() {
        let cfg = ControllerConfig::default();
        let mut st = VelocityControllerState::new(&cfg);
        st.pid.integral = 1.3;
        let mut cmd = 0.0;
        for _ in 0..50 {
            cmd = velocity_controller_step(0.5, 0.5, 0.01, &cfg, &mut st);
        }
        assert_abs_diff_eq!(cmd, 1.3, epsilon = 1e-12);
    }

    #[test]
    fn command_clamped_to_swing_range() {
        let cfg = ControllerConfig::default();
        let mut st = VelocityControllerState::new(&cfg);
        let hi = velocity_controller_step(5.0, 0.0, 0.01, &cfg, &mut st);
        assert_eq!(hi, 2.34);
        let mut st = VelocityControllerState::new(&cfg);
        let lo = velocity_controller_step(0.0, 5.0, 0.01, &cfg, &mut st);
        assert_eq!(lo, 0.78);
    }

    #[test]
    fn defaults_validate() {
        ControllerConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_motor_is_reported_with_section() {
        let mut cfg = ControllerConfig::default();
        cfg.motor.time_constant = 0.0;
        assert_eq!(cfg.validate().unwrap_err().key, "motor.time_constant");
    }
}
