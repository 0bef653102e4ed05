//! Run configuration read from a TOML file.
//!
//! Every key is optional and defaults to the baseline robot. Angles are in
//! radians, lengths in metres, forces in newtons, speeds in m/s and times in
//! seconds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use swingsim::control::{ControllerConfig, PathDef};
use swingsim::sim::{DescentSetup, Scenario, TargetProfile, DEFAULT_SETTLE_S};
use swingsim::{GaitConfig, ParamError, RobotParams, TerrainParams, WheelMode};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub robot: RobotParams,
    pub terrain: TerrainParams,
    pub gait: GaitConfig,
    pub scenario: ScenarioSection,
    pub controller: ControllerConfig,
    pub path: PathDef,
    pub descent: DescentSection,
    pub follow: FollowSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub mode: WheelMode,
    pub duration_s: f64,
    pub dt_s: f64,
    /// Steps between recorded trace rows.
    pub record_stride: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = Scenario::default();
        Self {
            mode: s.mode,
            duration_s: s.duration_s,
            dt_s: s.dt_s,
            record_stride: s.record_stride,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentSection {
    /// Downhill slope magnitude (rad).
    pub slope: f64,
    pub length_m: f64,
    /// Brake set-point (m/s).
    pub target: f64,
    /// Half-width of the brake switching band (m/s).
    pub hysteresis: f64,
    /// Leg angle held during the descent (rad).
    pub phi: f64,
    pub sample_s: f64,
    pub max_time_s: f64,
}

impl Default for DescentSection {
    fn default() -> Self {
        let d = DescentSetup::default();
        Self {
            slope: d.slope,
            length_m: d.length_m,
            target: d.target.unwrap_or(0.5),
            hysteresis: d.hysteresis,
            phi: d.phi,
            sample_s: d.sample_s,
            max_time_s: d.max_time_s,
        }
    }
}

impl DescentSection {
    pub fn setup(&self, brake: bool) -> DescentSetup {
        DescentSetup {
            slope: self.slope,
            length_m: self.length_m,
            target: brake.then_some(self.target),
            hysteresis: self.hysteresis,
            phi: self.phi,
            sample_s: self.sample_s,
            max_time_s: self.max_time_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FollowSection {
    /// Lead-in before the measured lap (s).
    pub settle_s: f64,
    /// Give up if the lap is not closed by then (s).
    pub max_time_s: f64,
}

impl Default for FollowSection {
    fn default() -> Self {
        Self {
            settle_s: DEFAULT_SETTLE_S,
            max_time_s: 300.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(#[from] ParamError),
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parse and fully validate a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ParamError> {
        let full = Scenario {
            controller: Some(self.controller.clone()),
            path: Some(self.path),
            ..self.scenario()
        };
        full.validate()?;
        self.descent
            .setup(true)
            .validate()
            .map_err(|e| e.in_section("descent"))?;
        if !(self.descent.phi > 0.0 && self.descent.phi < PI / 2.0) {
            return Err(ParamError::new("descent.phi", "must lie in (0, pi/2)"));
        }
        let f = &self.follow;
        if !(f.settle_s >= 0.0 && f.settle_s.is_finite()) {
            return Err(ParamError::new("follow.settle_s", "must be >= 0"));
        }
        if !(f.max_time_s > f.settle_s) {
            return Err(ParamError::new(
                "follow.max_time_s",
                "must exceed follow.settle_s",
            ));
        }
        Ok(())
    }

    /// Open-loop scenario described by the config.
    pub fn scenario(&self) -> Scenario {
        Scenario {
            params: self.robot,
            terrain: self.terrain,
            gait: self.gait,
            mode: self.scenario.mode,
            duration_s: self.scenario.duration_s,
            dt_s: self.scenario.dt_s,
            record_stride: self.scenario.record_stride,
            controller: None,
            target: TargetProfile::default(),
            path: None,
            frozen_phi: None,
        }
    }

    /// Effective configuration as TOML, re-parseable to an identical value.
    pub fn dump(&self) -> String {
        let body = toml::to_string(self).expect("config is always representable as TOML");
        format!("# swingsim configuration\n# units: rad, m, N, m/s, s\n\n{body}")
    }
}
