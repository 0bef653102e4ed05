use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// Closed inner motor loop seen from outside: a first-order lag with a slew
/// limit on the leg swing speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotorModel {
    /// Lag time constant (s).
    pub time_constant: f64,
    /// Maximum change of swing speed (rad/s^2).
    pub rate_limit: f64,
}

impl Default for MotorModel {
    fn default() -> Self {
        Self {
            time_constant: 0.05,
            rate_limit: 20.0,
        }
    }
}

impl MotorModel {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.time_constant > 0.0 && self.time_constant.is_finite()) {
            return Err(ParamError::new("time_constant", "must be > 0"));
        }
        if !(self.rate_limit > 0.0) {
            return Err(ParamError::new("rate_limit", "must be > 0"));
        }
        Ok(())
    }
}

/// Advance the actual swing speed toward `commanded` over `dt`.
///
/// Uses the exact discretization of the lag, so the response is independent
/// of the step size until the slew limit binds.
pub fn motor_track(commanded: f64, actual: f64, dt: f64, model: &MotorModel) -> f64 {
    let lag = (1.0 - (-dt / model.time_constant).exp()) * (commanded - actual);
    let max_step = model.rate_limit * dt;
    actual + lag.clamp(-max_step, max_step)
}
