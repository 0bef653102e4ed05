use std::f64::consts::PI;

use rayon::prelude::*;

use super::{run, RunFailure, Runner, Scenario, Trace};
use crate::error::{ParamError, SimError};
use crate::gait::{cycle_period, GaitConfig};
use crate::params::TerrainParams;

/// Mean with an offset so that a constant series returns that constant
/// bit for bit.
fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut first = None;
    let mut acc = 0.0;
    let mut n = 0usize;
    for v in values {
        let base = *first.get_or_insert(v);
        acc += v - base;
        n += 1;
    }
    first.map(|base| base + acc / n as f64)
}

/// Mean platform speed over each completed gait cycle of an open-loop trace.
pub fn cycle_means(trace: &Trace, gait: &GaitConfig) -> Vec<f64> {
    let period = cycle_period(gait);
    let cycles = (trace.end_time() / period + 1e-9).floor() as usize;
    (0..cycles)
        .filter_map(|k| {
            let (lo, hi) = (k as f64 * period, (k + 1) as f64 * period);
            mean(
                trace
                    .rows
                    .iter()
                    .filter(|r| r.t > lo && r.t <= hi)
                    .map(|r| r.vp),
            )
        })
        .collect()
}

/// Steady platform speed: the mean over the last two full gait cycles.
/// The trace must cover at least six cycles.
pub fn steady_velocity(trace: &Trace, gait: &GaitConfig) -> Result<f64, SimError> {
    let period = cycle_period(gait);
    let end = trace.end_time();
    if end + 1e-9 < 6.0 * period {
        return Err(SimError::InsufficientData(format!(
            "trace covers {end:.3} s, need six gait cycles ({:.3} s)",
            6.0 * period
        )));
    }
    let cycles = (end / period + 1e-9).floor();
    let hi = cycles * period;
    let lo = hi - 2.0 * period;
    mean(
        trace
            .rows
            .iter()
            .filter(|r| r.t > lo + 1e-12 && r.t <= hi + 1e-12)
            .map(|r| r.vp),
    )
    .ok_or_else(|| SimError::InsufficientData("no samples in the last two cycles".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    OmegaIn,
    OmegaOut,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::OmegaIn => "omega_in",
            SweepAxis::OmegaOut => "omega_out",
        }
    }

    fn apply(self, gait: &mut GaitConfig, value: f64) {
        match self {
            SweepAxis::OmegaIn => gait.omega_in = value,
            SweepAxis::OmegaOut => gait.omega_out = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub steady_velocity: Result<f64, SimError>,
}

/// Long enough for the steady-velocity window, whatever the gait.
fn with_steady_duration(mut scenario: Scenario) -> Scenario {
    let needed = 8.0 * cycle_period(&scenario.gait);
    scenario.duration_s = scenario.duration_s.max(needed);
    scenario
}

fn steady_of(scenario: &Scenario) -> Result<f64, SimError> {
    let trace = run(scenario).map_err(|f| f.error)?;
    steady_velocity(&trace, &scenario.gait)
}

/// Steady speed for each value of one swing speed, evaluated in parallel.
/// Rows keep the input order; a failing value does not stop the others.
pub fn sweep(base: &Scenario, axis: SweepAxis, values: &[f64]) -> Vec<SweepRow> {
    values
        .par_iter()
        .map(|&value| {
            let mut scenario = base.clone();
            axis.apply(&mut scenario.gait, value);
            let scenario = with_steady_duration(scenario);
            SweepRow {
                value,
                steady_velocity: steady_of(&scenario),
            }
        })
        .collect()
}

/// Steady speed at each `(omega_in, omega_out)` pair, evaluated in parallel.
pub fn grid_sweep(base: &Scenario, grid: &[(f64, f64)]) -> Vec<Result<f64, SimError>> {
    grid.par_iter()
        .map(|&(omega_in, omega_out)| {
            let mut scenario = base.clone();
            scenario.gait.omega_in = omega_in;
            scenario.gait.omega_out = omega_out;
            steady_of(&with_steady_duration(scenario))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClimbRow {
    pub alpha: f64,
    /// Steady climbing speed, zero when the robot cannot make headway.
    pub steady_velocity: f64,
    /// Unclipped mean over the last two cycles; negative when sliding back.
    pub mean_velocity: f64,
    /// Net displacement up the slope over the run (m).
    pub displacement: f64,
}

impl ClimbRow {
    pub fn climbs(&self) -> bool {
        self.steady_velocity > 0.0
    }
}

/// Steady speed up each slope angle (rad, uphill positive).
pub fn slope_climb(base: &Scenario, alphas: &[f64]) -> Vec<Result<ClimbRow, SimError>> {
    alphas
        .par_iter()
        .map(|&alpha| {
            if alpha < 0.0 {
                return Err(ParamError::new("terrain.slope", "climb angles must be >= 0").into());
            }
            let mut scenario = base.clone();
            scenario.terrain.slope = alpha;
            let scenario = with_steady_duration(scenario);
            let trace = run(&scenario).map_err(|f| f.error)?;
            let mean_velocity = steady_velocity(&trace, &scenario.gait)?;
            Ok(ClimbRow {
                alpha,
                steady_velocity: mean_velocity.max(0.0),
                mean_velocity,
                displacement: trace.rows.last().map_or(0.0, |r| r.x),
            })
        })
        .collect()
}

/// Downhill run with the legs held still and an optional bang-bang brake.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentSetup {
    /// Slope magnitude (rad); the run goes downhill.
    pub slope: f64,
    pub length_m: f64,
    /// Brake set-point; `None` leaves the brake released.
    pub target: Option<f64>,
    /// Half-width of the brake's switching band (m/s).
    pub hysteresis: f64,
    pub phi: f64,
    /// Brake decision period (s).
    pub sample_s: f64,
    /// Give up if the end of the slope is not reached by then (s).
    pub max_time_s: f64,
}

impl Default for DescentSetup {
    fn default() -> Self {
        Self {
            slope: 5f64.to_radians(),
            length_m: 9.0,
            target: Some(0.5),
            hysteresis: 0.03,
            phi: PI / 5.0,
            sample_s: 0.01,
            max_time_s: 120.0,
        }
    }
}

impl DescentSetup {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.slope > 0.0 && self.slope < PI / 4.0) {
            return Err(ParamError::new("slope", "must lie in (0, pi/4)"));
        }
        if !(self.length_m > 0.0 && self.length_m.is_finite()) {
            return Err(ParamError::new("length_m", "must be > 0"));
        }
        if let Some(v) = self.target {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ParamError::new("target", "must be > 0"));
            }
        }
        if !(self.hysteresis >= 0.0) {
            return Err(ParamError::new("hysteresis", "must be >= 0"));
        }
        if !(self.sample_s > 0.0) {
            return Err(ParamError::new("sample_s", "must be > 0"));
        }
        if !(self.max_time_s > 0.0) {
            return Err(ParamError::new("max_time_s", "must be > 0"));
        }
        Ok(())
    }
}

/// Coast down a slope of `setup.length_m`, braking about the target speed if
/// one is given. The trace ends when the robot passes the end of the slope.
pub fn braked_descent(base: &Scenario, setup: &DescentSetup) -> Result<Trace, RunFailure> {
    let fail = |error: SimError, partial: Trace| RunFailure { error, partial };
    let empty = || Trace::new(base.dt_s, base.record_stride.max(1));
    setup
        .validate()
        .map_err(|e| fail(e.in_section("descent").into(), empty()))?;

    let scenario = Scenario {
        terrain: TerrainParams {
            slope: -setup.slope,
            brake_engaged: false,
            ..base.terrain
        },
        frozen_phi: Some(setup.phi),
        controller: None,
        path: None,
        duration_s: setup.max_time_s,
        ..base.clone()
    };
    let mut runner = Runner::new(&scenario).map_err(|e| fail(e, empty()))?;
    let sample_steps = ((setup.sample_s / scenario.dt_s).round() as u64).max(1);
    if setup.target.is_some() {
        runner.set_brake(false);
    }
    let max_steps = scenario.steps();
    while runner.state().x < setup.length_m {
        if runner.steps_done() >= max_steps {
            return Err(fail(
                SimError::InsufficientData(format!(
                    "end of the {:.1} m slope not reached within {:.1} s",
                    setup.length_m, setup.max_time_s
                )),
                runner.into_trace(),
            ));
        }
        if let Some(target) = setup.target {
            if runner.steps_done() % sample_steps == 0 {
                let v = runner.state().vp;
                if v > target + setup.hysteresis {
                    runner.set_brake(true);
                } else if v < target - setup.hysteresis {
                    runner.set_brake(false);
                }
            }
        }
        if let Err(error) = runner.advance() {
            return Err(fail(error, runner.into_trace()));
        }
    }
    Ok(runner.into_trace())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Share of samples inside the band.
    pub in_band: f64,
    pub samples: usize,
}

/// Summary of a set of speed samples against the band `[lo, hi]`.
pub fn speed_stats(speeds: &[f64], lo: f64, hi: f64) -> Option<SpeedStats> {
    let m = mean(speeds.iter().copied())?;
    let inside = speeds.iter().filter(|v| (lo..=hi).contains(*v)).count();
    Some(SpeedStats {
        mean: m,
        min: speeds.iter().copied().fold(f64::INFINITY, f64::min),
        max: speeds.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        in_band: inside as f64 / speeds.len() as f64,
        samples: speeds.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FollowReport {
    pub trace: Trace,
    /// Time the measured lap started (s).
    pub lap_start: f64,
    /// Time the lap closed (s).
    pub lap_end: f64,
    /// Largest sensed lateral offset during the run (m).
    pub max_lateral_error: f64,
}

impl FollowReport {
    /// Speed samples recorded during the measured lap.
    pub fn lap_speeds(&self) -> Vec<f64> {
        self.trace
            .rows
            .iter()
            .filter(|r| r.t > self.lap_start && r.t <= self.lap_end)
            .map(|r| r.vp)
            .collect()
    }
}

/// Lead-in before the measured lap of [`follow_path`] (s).
pub const DEFAULT_SETTLE_S: f64 = 5.0;

/// Follow the scenario's path: run `settle_s` seconds to get up to speed,
/// then one full lap. `scenario.duration_s` caps the total time.
pub fn follow_path(scenario: &Scenario, settle_s: f64) -> Result<FollowReport, RunFailure> {
    let empty = || Trace::new(scenario.dt_s, scenario.record_stride.max(1));
    let fail = |error: SimError, partial: Trace| RunFailure { error, partial };
    let lap = match scenario.path.as_ref().map(|p| p.lap_span()) {
        Some(Some(span)) => span,
        Some(None) => {
            return Err(fail(
                ParamError::new("path.kind", "needs a closed path to measure a lap").into(),
                empty(),
            ))
        }
        None => return Err(fail(ParamError::new("path", "is required").into(), empty())),
    };
    let mut runner = Runner::new(scenario).map_err(|e| fail(e, empty()))?;
    let max_steps = scenario.steps();
    let mut max_lateral: f64 = 0.0;
    let mut lap_from: Option<(f64, f64)> = None;
    loop {
        if runner.steps_done() >= max_steps {
            return Err(fail(
                SimError::InsufficientData(format!(
                    "lap not completed within {:.1} s",
                    scenario.duration_s
                )),
                runner.into_trace(),
            ));
        }
        if let Err(error) = runner.advance() {
            return Err(fail(error, runner.into_trace()));
        }
        if let Some(row) = runner.trace().rows.last() {
            if let Some(p) = row.pose {
                max_lateral = max_lateral.max(p.lateral_error.abs());
            }
        }
        let t = runner.state().t;
        let progress = runner.path_progress().unwrap_or(0.0);
        match lap_from {
            None if t >= settle_s => lap_from = Some((t, progress)),
            Some((start, p0)) if progress - p0 >= lap => {
                return Ok(FollowReport {
                    trace: runner.into_trace(),
                    lap_start: start,
                    lap_end: t,
                    max_lateral_error: max_lateral,
                });
            }
            _ => {}
        }
    }
}
