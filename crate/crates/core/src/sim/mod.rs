//! Fixed-step integration of the coupled gait and dynamics.
//!
//! Each step picks the wheel deflection from the current swing phase,
//! evaluates the force balance, then advances speed and position with
//! semi-implicit Euler and moves the gait on. A [`Runner`] wraps the step
//! with the optional velocity loop, path follower and trace recording.

mod scenarios;
mod trace;

use std::collections::VecDeque;
use std::f64::consts::PI;

pub use scenarios::{
    braked_descent, cycle_means, follow_path, grid_sweep, slope_climb, speed_stats,
    steady_velocity, sweep, ClimbRow, DescentSetup, FollowReport, SpeedStats, SweepAxis, SweepRow,
    DEFAULT_SETTLE_S,
};
pub use trace::{sig9, PoseSample, Trace, TraceRow, BRAKE_COLUMN, POSE_COLUMNS, TRACE_COLUMNS};

use crate::control::{
    follow_step, motor_track, rudder_yaw_rate, velocity_controller_step, ControllerConfig,
    FollowerState, PathDef, Pose, VelocityControllerState,
};
use crate::dynamics::{apply_wheel_mode, deflection_inward, deflection_outward, force_balance};
use crate::error::{DynamicsError, ParamError, SimError};
use crate::gait::{advance, GaitConfig, LegPhase, Phase};
use crate::params::{RobotParams, TerrainParams, WheelMode};

/// Continuous state of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Platform speed along the heading, negative when reversing (m/s).
    pub vp: f64,
    /// Signed distance travelled along the heading (m).
    pub x: f64,
    pub heading: f64,
    /// Planar position (m).
    pub position: [f64; 2],
    pub leg: LegPhase,
    pub last_beta: f64,
}

impl SimState {
    pub fn at_rest(gait: &GaitConfig) -> Self {
        Self {
            t: 0.0,
            vp: 0.0,
            x: 0.0,
            heading: 0.0,
            position: [0.0, 0.0],
            leg: LegPhase::start(gait),
            last_beta: 0.0,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose {
            x: self.position[0],
            y: self.position[1],
            heading: self.heading,
        }
    }
}

/// Velocity set-point schedule: each entry `(start_s, target)` holds from its
/// start time until the next entry.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetProfile(pub Vec<(f64, f64)>);

impl TargetProfile {
    pub fn constant(v: f64) -> Self {
        Self(vec![(0.0, v)])
    }

    /// Staircase of targets, each held for `hold_s`.
    pub fn staircase(levels: &[f64], hold_s: f64) -> Self {
        Self(
            levels
                .iter()
                .enumerate()
                .map(|(i, &v)| (i as f64 * hold_s, v))
                .collect(),
        )
    }

    pub fn at(&self, t: f64) -> f64 {
        self.0
            .iter()
            .take_while(|(start, _)| *start <= t)
            .last()
            .or(self.0.first())
            .map_or(0.0, |&(_, v)| v)
    }
}

impl Default for TargetProfile {
    fn default() -> Self {
        Self::constant(0.5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: RobotParams,
    pub terrain: TerrainParams,
    pub gait: GaitConfig,
    pub mode: WheelMode,
    pub duration_s: f64,
    pub dt_s: f64,
    /// Record one trace row every this many steps.
    pub record_stride: usize,
    /// Close the velocity loop with this controller.
    pub controller: Option<ControllerConfig>,
    /// Velocity targets used when a controller is present.
    pub target: TargetProfile,
    /// Follow this path with the rudder (requires a controller).
    pub path: Option<PathDef>,
    /// Hold the legs still at this angle with the wheels coasting.
    pub frozen_phi: Option<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            params: RobotParams::default(),
            terrain: TerrainParams::default(),
            gait: GaitConfig::default(),
            mode: WheelMode::Forward,
            duration_s: 10.0,
            dt_s: 1e-3,
            record_stride: 10,
            controller: None,
            target: TargetProfile::default(),
            path: None,
            frozen_phi: None,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ParamError> {
        self.params.validate().map_err(|e| e.in_section("robot"))?;
        self.terrain
            .validate()
            .map_err(|e| e.in_section("terrain"))?;
        self.gait.validate().map_err(|e| e.in_section("gait"))?;
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(ParamError::new("scenario.duration_s", "must be > 0"));
        }
        if !(1e-5..=1e-2).contains(&self.dt_s) {
            return Err(ParamError::new("scenario.dt_s", "must lie in [1e-5, 1e-2]"));
        }
        if self.record_stride == 0 {
            return Err(ParamError::new("scenario.record_stride", "must be >= 1"));
        }
        if let Some(c) = &self.controller {
            c.validate().map_err(|e| e.in_section("controller"))?;
        }
        if let Some(p) = &self.path {
            p.validate().map_err(|e| e.in_section("path"))?;
            if self.controller.is_none() {
                return Err(ParamError::new(
                    "path",
                    "following a path needs a controller",
                ));
            }
        }
        if let Some(phi) = self.frozen_phi {
            if !(phi > 0.0 && phi < PI / 2.0) {
                return Err(ParamError::new("frozen_phi", "must lie in (0, pi/2)"));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        (self.duration_s / self.dt_s).round() as u64
    }
}

/// Forces evaluated during one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepForces {
    pub beta: f64,
    pub normal: f64,
    pub thrust: f64,
    pub resistance: f64,
    pub accel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepped {
    pub state: SimState,
    pub forces: StepForces,
}

struct StepInputs<'a> {
    params: &'a RobotParams,
    terrain: &'a TerrainParams,
    gait: &'a GaitConfig,
    mode: WheelMode,
    frozen_phi: Option<f64>,
    dt: f64,
    yaw_gain: f64,
}

fn wheel_deflection(state: &SimState, inp: &StepInputs) -> Result<f64, DynamicsError> {
    let phi = state.leg.phi;
    // Speed in the direction the wheels drive the robot.
    let travel = (inp.mode.sign() * state.vp).max(0.0);
    let beta = if inp.frozen_phi.is_some() {
        -phi
    } else {
        match state.leg.phase {
            Phase::Inward => deflection_inward(phi, inp.gait.omega_in, travel, inp.params)?,
            Phase::Outward => deflection_outward(phi, inp.gait.omega_out, travel, inp.params)?,
            // coast alignment: wheel rolls along the heading, no thrust
            Phase::Pause => -phi,
        }
    };
    Ok(apply_wheel_mode(beta, inp.mode))
}

fn step_with(state: &SimState, inp: &StepInputs) -> Result<Stepped, SimError> {
    let wrap = |source: DynamicsError| SimError::Dynamics {
        t: state.t,
        vp: state.vp,
        source,
    };
    let beta = wheel_deflection(state, inp).map_err(wrap)?;
    let fb = force_balance(
        state.leg.phi,
        beta,
        state.vp,
        inp.mode,
        inp.params,
        inp.terrain,
    )
    .map_err(wrap)?;
    let accel = fb.acceleration(state.vp);

    let mut vp = state.vp + accel * inp.dt;
    // Friction can stop the robot but not reverse it within a step.
    if state.vp != 0.0 && vp * state.vp < 0.0 {
        vp = 0.0;
    }
    let heading = state.heading + inp.yaw_gain * vp * inp.dt;
    let (sin_h, cos_h) = heading.sin_cos();
    let leg = match inp.frozen_phi {
        Some(_) => state.leg,
        None => advance(&state.leg, inp.gait, inp.dt)?,
    };
    Ok(Stepped {
        state: SimState {
            t: state.t + inp.dt,
            vp,
            x: state.x + vp * inp.dt,
            heading,
            position: [
                state.position[0] + vp * cos_h * inp.dt,
                state.position[1] + vp * sin_h * inp.dt,
            ],
            leg,
            last_beta: beta,
        },
        forces: StepForces {
            beta,
            normal: fb.normal,
            thrust: fb.thrust,
            resistance: fb.resistance(),
            accel,
        },
    })
}

/// Advance an open-loop scenario by one step of `scenario.dt_s`.
pub fn step(state: &SimState, scenario: &Scenario) -> Result<Stepped, SimError> {
    step_with(
        state,
        &StepInputs {
            params: &scenario.params,
            terrain: &scenario.terrain,
            gait: &scenario.gait,
            mode: scenario.mode,
            frozen_phi: scenario.frozen_phi,
            dt: scenario.dt_s,
            yaw_gain: 0.0,
        },
    )
}

/// Initial state for a scenario: at rest, legs open, on the path if any.
pub fn initial_state(scenario: &Scenario) -> SimState {
    let mut state = SimState::at_rest(&scenario.gait);
    if let Some(phi) = scenario.frozen_phi {
        state.leg = LegPhase {
            phase: Phase::Pause,
            phi,
            time_in_phase: 0.0,
        };
    }
    if let Some(path) = &scenario.path {
        let pose = path.pose_at(0.0);
        state.position = [pose.x, pose.y];
        state.heading = pose.heading;
    }
    state
}

struct Loop {
    cfg: ControllerConfig,
    velocity: VelocityControllerState,
    omega_in: f64,
    command: f64,
    window: VecDeque<f64>,
    window_len: usize,
    sample_steps: u64,
    follower: Option<(PathDef, FollowerState)>,
    gamma: f64,
}

impl Loop {
    fn measured(&self, fallback: f64) -> f64 {
        if self.window.is_empty() {
            fallback
        } else {
            self.window.iter().sum::<f64>() / self.window.len() as f64
        }
    }
}

/// Step-by-step driver for a scenario, recording a [`Trace`].
pub struct Runner<'a> {
    scenario: &'a Scenario,
    terrain: TerrainParams,
    state: SimState,
    steps_done: u64,
    control: Option<Loop>,
    trace: Trace,
    brake_column: bool,
}

impl<'a> Runner<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let dt = scenario.dt_s;
        let control = scenario.controller.clone().map(|cfg| {
            let velocity = VelocityControllerState::new(&cfg);
            let omega_in = velocity.last_command;
            let window_len = ((cfg.measure_window_s / dt).round() as usize).max(1);
            let sample_steps = ((cfg.sample_s / dt).round() as u64).max(1);
            let follower = scenario.path.map(|p| (p, FollowerState::at(0.0)));
            Loop {
                cfg,
                velocity,
                omega_in,
                command: omega_in,
                window: VecDeque::with_capacity(window_len + 1),
                window_len,
                sample_steps,
                follower,
                gamma: 0.0,
            }
        });
        Ok(Self {
            scenario,
            terrain: scenario.terrain,
            state: initial_state(scenario),
            steps_done: 0,
            control,
            trace: Trace::new(dt, scenario.record_stride),
            brake_column: false,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    pub fn steps_done(&self) -> u64 {
        self.steps_done
    }

    /// Engage or release the front brake from now on; adds a brake column to
    /// the trace.
    pub fn set_brake(&mut self, engaged: bool) {
        self.terrain.brake_engaged = engaged;
        self.brake_column = true;
    }

    pub fn brake_engaged(&self) -> bool {
        self.terrain.brake_engaged
    }

    /// Total parameter advance of the path follower, if following.
    pub fn path_progress(&self) -> Option<f64> {
        self.control
            .as_ref()
            .and_then(|c| c.follower.as_ref())
            .map(|(_, f)| f.progress)
    }

    pub fn advance(&mut self) -> Result<(), SimError> {
        let scenario = self.scenario;
        let dt = scenario.dt_s;
        let mut gait = scenario.gait;
        let mut yaw_gain = 0.0;

        if let Some(ctl) = self.control.as_mut() {
            if self.steps_done.is_multiple_of(ctl.sample_steps) {
                let target = scenario.target.at(self.state.t);
                let measured = ctl.measured(self.state.vp);
                ctl.command = velocity_controller_step(
                    target,
                    measured,
                    ctl.cfg.sample_s,
                    &ctl.cfg,
                    &mut ctl.velocity,
                );
                if let Some((path, follower)) = ctl.follower.as_mut() {
                    ctl.gamma = follow_step(
                        &self.state.pose(),
                        path,
                        &ctl.cfg.steering,
                        follower,
                        ctl.cfg.sample_s,
                    )
                    .map_err(|lost| SimError::PathLost {
                        t: self.state.t,
                        offset: lost.offset,
                        half_span: lost.half_span,
                    })?;
                }
            }
            ctl.omega_in = motor_track(ctl.command, ctl.omega_in, dt, &ctl.cfg.motor);
            gait.omega_in = ctl.omega_in;
            gait.omega_out = ctl.cfg.omega_out;
            if ctl.follower.is_some() {
                yaw_gain = rudder_yaw_rate(ctl.gamma, 1.0, &ctl.cfg.steering);
            }
        }

        let stepped = step_with(
            &self.state,
            &StepInputs {
                params: &scenario.params,
                terrain: &self.terrain,
                gait: &gait,
                mode: scenario.mode,
                frozen_phi: scenario.frozen_phi,
                dt,
                yaw_gain,
            },
        )?;
        self.steps_done += 1;
        let mut state = stepped.state;
        state.t = self.steps_done as f64 * dt;
        self.state = state;

        if let Some(ctl) = self.control.as_mut() {
            ctl.window.push_back(state.vp);
            while ctl.window.len() > ctl.window_len {
                ctl.window.pop_front();
            }
        }

        if self
            .steps_done
            .is_multiple_of(scenario.record_stride as u64)
        {
            let f = stepped.forces;
            let pose = self.control.as_ref().and_then(|c| {
                c.follower.as_ref().map(|(_, fs)| PoseSample {
                    px: state.position[0],
                    py: state.position[1],
                    lateral_error: fs.last_offset,
                    gamma: c.gamma,
                })
            });
            self.trace.rows.push(TraceRow {
                t: state.t,
                phi: state.leg.phi,
                phase: state.leg.phase,
                beta: f.beta,
                normal: f.normal,
                thrust: f.thrust,
                resistance: f.resistance,
                accel: f.accel,
                vp: state.vp,
                x: state.x,
                heading: state.heading,
                cmd_omega_in: self.control.as_ref().map(|c| c.command),
                pose,
                brake: self.brake_column.then_some(self.terrain.brake_engaged),
            });
        }
        Ok(())
    }
}

/// A run that stopped early, with everything recorded up to the failure.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: SimError,
    pub partial: Trace,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (partial trace of {} rows up to t={:.3} s)",
            self.error,
            self.partial.rows.len(),
            self.partial.end_time()
        )
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Run a scenario for its full duration. Identical scenarios give
/// bit-identical traces.
pub fn run(scenario: &Scenario) -> Result<Trace, RunFailure> {
    let mut runner = Runner::new(scenario).map_err(|error| RunFailure {
        error,
        partial: Trace::new(scenario.dt_s, scenario.record_stride.max(1)),
    })?;
    let steps = scenario.steps();
    while runner.steps_done() < steps {
        if let Err(error) = runner.advance() {
            return Err(RunFailure {
                error,
                partial: runner.into_trace(),
            });
        }
    }
    Ok(runner.into_trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn resting_in_pause_stays_at_rest() {
        let scn = Scenario::default();
        let mut state = SimState::at_rest(&scn.gait);
        state.leg = LegPhase {
            phase: Phase::Pause,
            phi: scn.gait.phi_max,
            time_in_phase: 0.0,
        };
        let next = step(&state, &scn).unwrap();
        assert_eq!(next.state.vp, 0.0);
        assert_eq!(next.forces.accel, 0.0);
    }

    #[test]
    fn capped_kick_from_rest() {
        let scn = Scenario {
            gait: GaitConfig {
                omega_in: 2.0,
                ..GaitConfig::default()
            },
            ..Scenario::default()
        };
        let mut state = SimState::at_rest(&scn.gait);
        state.leg.phi = PI / 5.0;
        let next = step(&state, &scn).unwrap();
        assert_abs_diff_eq!(next.state.vp, 1.00 * scn.dt_s, epsilon = 0.01 * scn.dt_s);
        assert_abs_diff_eq!(next.forces.beta, FRAC_PI_4, epsilon = 0.01);
    }

    #[test]
    fn half_cycle_run_ends_mid_inward() {
        let gait = GaitConfig::default();
        let period = crate::gait::cycle_period(&gait);
        let inward = gait.amplitude() / gait.omega_in;
        let scn = Scenario {
            duration_s: 0.8 * inward,
            ..Scenario::default()
        };
        assert!(scn.duration_s < 0.5 * period);
        let trace = run(&scn).unwrap();
        let last = trace.rows.last().unwrap();
        assert_eq!(last.phase, Phase::Inward);
        assert!(last.vp > 0.0);
        assert!(trace.rows.windows(2).all(|w| w[1].vp >= w[0].vp));
    }

    #[test]
    fn runs_are_deterministic() {
        let scn = Scenario {
            duration_s: 3.0,
            ..Scenario::default()
        };
        assert_eq!(run(&scn).unwrap(), run(&scn).unwrap());
    }

    #[test]
    fn rows_spaced_by_stride() {
        let scn = Scenario {
            duration_s: 1.0,
            ..Scenario::default()
        };
        let trace = run(&scn).unwrap();
        assert_eq!(trace.rows.len(), 100);
        for w in trace.rows.windows(2) {
            assert_abs_diff_eq!(w[1].t - w[0].t, 0.01, epsilon = 1e-12);
        }
    }

    #[test]
    fn coasting_on_flat_never_speeds_up() {
        let scn = Scenario {
            frozen_phi: Some(PI / 5.0),
            duration_s: 5.0,
            ..Scenario::default()
        };
        let mut state = initial_state(&scn);
        state.vp = 0.8;
        let mut prev = state.vp;
        for _ in 0..5000 {
            state = step(&state, &scn).unwrap().state;
            assert!(state.vp <= prev);
            assert!(state.vp >= 0.0);
            prev = state.vp;
        }
        assert_eq!(state.vp, 0.0);
    }

    #[test]
    fn reversed_wheels_drive_backwards() {
        let scn = Scenario {
            mode: WheelMode::Reversed,
            duration_s: 6.0,
            ..Scenario::default()
        };
        let trace = run(&scn).unwrap();
        assert!(trace.rows.iter().all(|r| r.vp <= 0.0));
        assert!(trace.rows.windows(2).all(|w| w[1].x <= w[0].x));
        assert!(trace.rows.last().unwrap().x < -1.0);
    }

    #[test]
    fn invalid_dt_is_rejected_with_partial_trace() {
        let scn = Scenario {
            dt_s: 0.5,
            ..Scenario::default()
        };
        let failure = run(&scn).unwrap_err();
        assert!(matches!(failure.error, SimError::Params(ref p) if p.key == "scenario.dt_s"));
        assert!(failure.partial.rows.is_empty());
    }

    #[test]
    fn singular_configuration_reports_state() {
        let scn = Scenario {
            params: RobotParams {
                barycenter_height: 3.0,
                ..RobotParams::default()
            },
            ..Scenario::default()
        };
        let failure = run(&scn).unwrap_err();
        assert!(matches!(failure.error, SimError::Dynamics { .. }));
    }

    #[test]
    fn target_profile_lookup() {
        let p = TargetProfile::staircase(&[0.3, 0.5, 0.4], 5.0);
        assert_eq!(p.at(0.0), 0.3);
        assert_eq!(p.at(4.99), 0.3);
        assert_eq!(p.at(5.0), 0.5);
        assert_eq!(p.at(100.0), 0.4);
    }
}
