//! Physical constants of the robot and the ground it runs on.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// Physical parameters of the robot body, legs and anti-bias wheels.
///
/// Defaults reproduce the baseline robot: 44.1 N platform, 7.35 N legs,
/// tile-floor friction and a 19.5 degree wheel tilt axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    /// Weight of the supporting platform (N).
    pub platform_weight: f64,
    /// Weight of a single leg (N).
    pub leg_weight: f64,
    /// Head link length (m).
    pub head_link_length: f64,
    /// Leg length, hip to wheel contact (m).
    pub leg_length: f64,
    /// Distance from the front wheel to the platform barycenter (m).
    pub barycenter_offset: f64,
    /// Height of the barycenter above ground (m).
    pub barycenter_height: f64,
    /// Fixed head link angle (rad).
    pub head_link_angle: f64,
    /// Angle between the wheel's tilted pivot axis and the ground (rad).
    pub tilt_angle: f64,
    /// Rolling friction coefficient.
    pub mu_roll: f64,
    /// Sliding friction coefficient.
    pub mu_slide: f64,
    /// Linear air drag coefficient (N s/m).
    pub air_drag: f64,
    /// Gravitational acceleration (m/s^2).
    pub gravity: f64,
    /// Lever arm of the wheel about the hip used by the deflection law (m).
    pub sweep_arm: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            platform_weight: 44.1,
            leg_weight: 7.35,
            head_link_length: 0.25,
            leg_length: 0.30,
            barycenter_offset: 0.12,
            barycenter_height: 0.1,
            head_link_angle: PI / 9.0,
            tilt_angle: 39.0 * PI / 360.0,
            mu_roll: 0.02,
            mu_slide: 0.25,
            air_drag: 0.1,
            gravity: 9.81,
            sweep_arm: 0.30,
        }
    }
}

impl RobotParams {
    /// Total weight carried by the ground, platform plus both legs (N).
    pub fn total_weight(&self) -> f64 {
        self.platform_weight + 2.0 * self.leg_weight
    }

    pub fn mass(&self) -> f64 {
        self.total_weight() / self.gravity
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let finite = [
            ("platform_weight", self.platform_weight),
            ("leg_weight", self.leg_weight),
            ("head_link_length", self.head_link_length),
            ("leg_length", self.leg_length),
            ("barycenter_offset", self.barycenter_offset),
            ("barycenter_height", self.barycenter_height),
            ("head_link_angle", self.head_link_angle),
            ("tilt_angle", self.tilt_angle),
            ("mu_roll", self.mu_roll),
            ("mu_slide", self.mu_slide),
            ("air_drag", self.air_drag),
            ("gravity", self.gravity),
            ("sweep_arm", self.sweep_arm),
        ];
        for (key, value) in finite {
            if !value.is_finite() {
                return Err(ParamError::new(key, "must be finite"));
            }
        }
        let positive = [
            ("platform_weight", self.platform_weight),
            ("leg_weight", self.leg_weight),
            ("head_link_length", self.head_link_length),
            ("leg_length", self.leg_length),
            ("barycenter_offset", self.barycenter_offset),
            ("barycenter_height", self.barycenter_height),
            ("gravity", self.gravity),
            ("sweep_arm", self.sweep_arm),
        ];
        for (key, value) in positive {
            if value <= 0.0 {
                return Err(ParamError::new(key, "must be > 0"));
            }
        }
        if !(self.tilt_angle > 0.0 && self.tilt_angle < FRAC_PI_2) {
            return Err(ParamError::new("tilt_angle", "must lie in (0, pi/2)"));
        }
        if self.mu_roll < 0.0 {
            return Err(ParamError::new("mu_roll", "must be >= 0"));
        }
        if self.mu_slide <= self.mu_roll {
            return Err(ParamError::new("mu_slide", "must exceed mu_roll"));
        }
        if self.tilt_angle.tan() < self.mu_slide {
            return Err(ParamError::new(
                "mu_slide",
                "must not exceed tan(tilt_angle), otherwise no sliding limit angle exists",
            ));
        }
        if self.air_drag < 0.0 {
            return Err(ParamError::new("air_drag", "must be >= 0"));
        }
        Ok(())
    }
}

/// Ground the robot is driving on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerrainParams {
    /// Slope angle along the direction of travel (rad). Positive is uphill,
    /// negative is downhill.
    pub slope: f64,
    pub brake_engaged: bool,
    /// Coulomb coefficient of the front-wheel brake.
    pub mu_brake: f64,
}

impl Default for TerrainParams {
    fn default() -> Self {
        Self {
            slope: 0.0,
            brake_engaged: false,
            mu_brake: 0.4,
        }
    }
}

impl TerrainParams {
    pub fn flat() -> Self {
        Self::default()
    }

    pub fn with_slope(slope: f64) -> Self {
        Self {
            slope,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !self.slope.is_finite() || self.slope.abs() >= FRAC_PI_4 {
            return Err(ParamError::new("slope", "|slope| must be < pi/4"));
        }
        if !self.mu_brake.is_finite() || self.mu_brake < 0.0 {
            return Err(ParamError::new("mu_brake", "must be >= 0"));
        }
        Ok(())
    }
}

/// How the anti-bias wheels are mounted on the legs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WheelMode {
    #[default]
    Forward,
    /// Wheels attached backwards: deflection and friction directions flip and
    /// the robot drives in reverse.
    Reversed,
}

impl WheelMode {
    /// +1 for forward mounting, -1 for reversed.
    pub fn sign(self) -> f64 {
        match self {
            WheelMode::Forward => 1.0,
            WheelMode::Reversed => -1.0,
        }
    }
}
