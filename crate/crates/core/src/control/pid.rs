use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// PID gains with output clamping and integral anti-windup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub output_min: f64,
    pub output_max: f64,
    /// Bound on the accumulated integral contribution, in output units.
    pub integral_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 1.0,
            ki: 0.0,
            kd: 0.0,
            output_min: f64::NEG_INFINITY,
            output_max: f64::INFINITY,
            integral_limit: f64::INFINITY,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<(), ParamError> {
        for (key, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !v.is_finite() {
                return Err(ParamError::new(key, "must be finite"));
            }
        }
        if !(self.output_min < self.output_max) {
            return Err(ParamError::new("output_max", "must exceed output_min"));
        }
        if !(self.integral_limit >= 0.0) {
            return Err(ParamError::new("integral_limit", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    /// Integral contribution `sum(ki * e * dt)`, already in output units so a
    /// gain change does not bump the output.
    pub integral: f64,
    pub prev_error: Option<f64>,
}

impl PidState {
    pub fn with_integral(integral: f64) -> Self {
        Self {
            integral,
            prev_error: None,
        }
    }
}

/// One PID update. Integration is suspended while the output is saturated
/// in the direction the error pushes, and the integral is clamped to
/// `integral_limit`.
pub fn pid_update(gains: &PidGains, state: &mut PidState, error: f64, dt: f64) -> f64 {
    let derivative = match state.prev_error {
        Some(prev) if dt > 0.0 => (error - prev) / dt,
        _ => 0.0,
    };
    state.prev_error = Some(error);

    let unsat = gains.kp * error + state.integral + gains.kd * derivative;
    let pushing_high = unsat >= gains.output_max && error > 0.0;
    let pushing_low = unsat <= gains.output_min && error < 0.0;
    if !(pushing_high || pushing_low) {
        state.integral = (state.integral + gains.ki * error * dt)
            .clamp(-gains.integral_limit, gains.integral_limit);
    }
    (gains.kp * error + state.integral + gains.kd * derivative)
        .clamp(gains.output_min, gains.output_max)
}
