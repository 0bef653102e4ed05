//! Symmetric dual-leg swing gait.
//!
//! Both legs mirror each other, so a single [`LegPhase`] describes the gait.
//! The leg sweeps inward from `phi_max` to `phi_min`, outward back to
//! `phi_max`, and pauses at the configured turning points.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PausePlacement {
    /// One pause per cycle, at `phi_max` before the inward kick.
    #[default]
    BeforeInward,
    /// A pause at both turning points.
    BeforeBoth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitConfig {
    pub phi_min: f64,
    pub phi_max: f64,
    /// Inward swing speed (rad/s).
    pub omega_in: f64,
    /// Outward swing speed (rad/s).
    pub omega_out: f64,
    /// Length of each pause (s).
    pub pause_s: f64,
    pub pause_placement: PausePlacement,
}

impl Default for GaitConfig {
    fn default() -> Self {
        Self {
            phi_min: 3.0 * PI / 20.0,
            phi_max: 11.0 * PI / 40.0,
            omega_in: 1.17,
            omega_out: 0.975,
            pause_s: 0.15,
            pause_placement: PausePlacement::BeforeInward,
        }
    }
}

/// Below this the robot tips over.
pub const PHI_LOWER_BOUND: f64 = PI / 36.0;
/// Above this the legs produce too little propulsion to stay balanced.
pub const PHI_UPPER_BOUND: f64 = PI / 3.0;

impl GaitConfig {
    pub fn amplitude(&self) -> f64 {
        self.phi_max - self.phi_min
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.phi_min > PHI_LOWER_BOUND) {
            return Err(ParamError::new(
                "phi_min",
                format!("must exceed pi/36 ({PHI_LOWER_BOUND:.4} rad); the robot loses balance below it"),
            ));
        }
        if !(self.phi_max < PHI_UPPER_BOUND) {
            return Err(ParamError::new(
                "phi_max",
                format!("must be below pi/3 ({PHI_UPPER_BOUND:.4} rad); the robot loses balance above it"),
            ));
        }
        if !(self.phi_min < self.phi_max) {
            return Err(ParamError::new("phi_max", "must exceed phi_min"));
        }
        if !(self.omega_in > 0.0 && self.omega_in.is_finite()) {
            return Err(ParamError::new("omega_in", "must be > 0"));
        }
        if !(self.omega_out > 0.0 && self.omega_out.is_finite()) {
            return Err(ParamError::new("omega_out", "must be > 0"));
        }
        if !(self.pause_s >= 0.0 && self.pause_s.is_finite()) {
            return Err(ParamError::new("pause_s", "must be >= 0"));
        }
        Ok(())
    }

    fn pauses_per_cycle(&self) -> f64 {
        match self.pause_placement {
            PausePlacement::BeforeInward => 1.0,
            PausePlacement::BeforeBoth => 2.0,
        }
    }
}

/// Duration of one full swing cycle (s).
pub fn cycle_period(cfg: &GaitConfig) -> f64 {
    let amp = cfg.amplitude();
    amp / cfg.omega_in + amp / cfg.omega_out + cfg.pause_s * cfg.pauses_per_cycle()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Inward,
    Outward,
    Pause,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Inward => "inward",
            Phase::Outward => "outward",
            Phase::Pause => "pause",
        }
    }

    /// Small integer code used in numeric trace columns.
    pub fn code(self) -> u8 {
        match self {
            Phase::Inward => 0,
            Phase::Outward => 1,
            Phase::Pause => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegPhase {
    pub phase: Phase,
    pub phi: f64,
    pub time_in_phase: f64,
}

impl LegPhase {
    /// Legs fully open, about to kick inward.
    pub fn start(cfg: &GaitConfig) -> Self {
        Self {
            phase: Phase::Inward,
            phi: cfg.phi_max,
            time_in_phase: 0.0,
        }
    }

    fn enter(phase: Phase, phi: f64) -> Self {
        Self {
            phase,
            phi,
            time_in_phase: 0.0,
        }
    }
}

/// Signed leg angular velocity: negative while closing, positive while opening.
pub fn current_omega(leg: &LegPhase, cfg: &GaitConfig) -> f64 {
    match leg.phase {
        Phase::Inward => -cfg.omega_in,
        Phase::Outward => cfg.omega_out,
        Phase::Pause => 0.0,
    }
}

fn after_inward(cfg: &GaitConfig) -> LegPhase {
    match cfg.pause_placement {
        PausePlacement::BeforeBoth if cfg.pause_s > 0.0 => {
            LegPhase::enter(Phase::Pause, cfg.phi_min)
        }
        _ => LegPhase::enter(Phase::Outward, cfg.phi_min),
    }
}

fn after_outward(cfg: &GaitConfig) -> LegPhase {
    if cfg.pause_s > 0.0 {
        LegPhase::enter(Phase::Pause, cfg.phi_max)
    } else {
        LegPhase::enter(Phase::Inward, cfg.phi_max)
    }
}

/// Advance the gait by `dt` seconds.
///
/// `phi` is clamped to the turning point when a swing completes; any time
/// left in the step after the turning point is spent in the next phase so
/// the gait clock never drifts.
pub fn advance(leg: &LegPhase, cfg: &GaitConfig, dt: f64) -> Result<LegPhase, ParamError> {
    cfg.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ParamError::new("dt", "must be > 0"));
    }
    let mut leg = *leg;
    let mut remaining = dt;
    // Each pass either consumes the remaining time or completes a phase.
    for _ in 0..8 {
        if remaining <= 0.0 {
            break;
        }
        match leg.phase {
            Phase::Inward => {
                let to_go = (leg.phi - cfg.phi_min).max(0.0) / cfg.omega_in;
                if to_go > remaining {
                    leg.phi -= cfg.omega_in * remaining;
                    leg.time_in_phase += remaining;
                    remaining = 0.0;
                } else {
                    remaining -= to_go;
                    leg = after_inward(cfg);
                }
            }
            Phase::Outward => {
                let to_go = (cfg.phi_max - leg.phi).max(0.0) / cfg.omega_out;
                if to_go > remaining {
                    leg.phi += cfg.omega_out * remaining;
                    leg.time_in_phase += remaining;
                    remaining = 0.0;
                } else {
                    remaining -= to_go;
                    leg = after_outward(cfg);
                }
            }
            Phase::Pause => {
                let to_go = (cfg.pause_s - leg.time_in_phase).max(0.0);
                if to_go > remaining {
                    leg.time_in_phase += remaining;
                    remaining = 0.0;
                } else {
                    remaining -= to_go;
                    // A pause at the inner turning point precedes the outward swing.
                    let at_min = (leg.phi - cfg.phi_min).abs() < (cfg.phi_max - leg.phi).abs();
                    leg = if at_min {
                        LegPhase::enter(Phase::Outward, cfg.phi_min)
                    } else {
                        LegPhase::enter(Phase::Inward, cfg.phi_max)
                    };
                }
            }
        }
    }
    leg.phi = leg.phi.clamp(cfg.phi_min, cfg.phi_max);
    Ok(leg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn inward_integrates_linearly() {
        let cfg = GaitConfig::default();
        let leg = LegPhase::start(&cfg);
        let next = advance(&leg, &cfg, 0.1).unwrap();
        assert_eq!(next.phase, Phase::Inward);
        assert_abs_diff_eq!(next.phi, cfg.phi_max - 0.117, epsilon = 1e-12);
    }

    #[test]
    fn inward_near_boundary_transitions() {
        let cfg = GaitConfig::default();
        let leg = LegPhase {
            phase: Phase::Inward,
            phi: cfg.phi_min + 1e-9,
            time_in_phase: 0.3,
        };
        let next = advance(&leg, &cfg, 1e-3).unwrap();
        assert_eq!(next.phase, Phase::Outward);
        // the time left after reaching phi_min is spent swinging outward
        let rest = 1e-3 - 1e-9 / cfg.omega_in;
        assert_abs_diff_eq!(
            next.phi,
            cfg.phi_min + cfg.omega_out * rest,
            epsilon = 1e-12
        );
    }

    #[test]
    fn default_cycle_period() {
        let cfg = GaitConfig::default();
        // pi/8 / 1.17 + pi/8 / 0.975 + 0.15
        assert_abs_diff_eq!(cycle_period(&cfg), 0.888, epsilon = 1e-3);
    }

    #[test]
    fn pause_free_equal_speed_period() {
        let cfg = GaitConfig {
            omega_in: 0.78,
            omega_out: 0.78,
            pause_s: 0.0,
            ..GaitConfig::default()
        };
        assert_abs_diff_eq!(cycle_period(&cfg), 1.007, epsilon = 1e-3);
    }

    #[test]
    fn double_pause_adds_two_pauses() {
        let none = GaitConfig {
            pause_s: 0.0,
            ..GaitConfig::default()
        };
        let both = GaitConfig {
            pause_placement: PausePlacement::BeforeBoth,
            ..GaitConfig::default()
        };
        assert_abs_diff_eq!(
            cycle_period(&both) - cycle_period(&none),
            0.30,
            epsilon = 1e-12
        );
    }

    #[test]
    fn fast_inward_limit() {
        let cfg = GaitConfig {
            omega_in: 1e12,
            ..GaitConfig::default()
        };
        assert_abs_diff_eq!(
            cycle_period(&cfg),
            cfg.amplitude() / cfg.omega_out + cfg.pause_s,
            epsilon = 1e-9
        );
    }

    #[test]
    fn signed_omega_per_phase() {
        let cfg = GaitConfig::default();
        let mut leg = LegPhase::start(&cfg);
        assert_eq!(current_omega(&leg, &cfg), -1.17);
        leg.phase = Phase::Outward;
        assert_eq!(current_omega(&leg, &cfg), 0.975);
        leg.phase = Phase::Pause;
        assert_eq!(current_omega(&leg, &cfg), 0.0);
    }

    #[test]
    fn rejects_unbalanced_range() {
        let cfg = GaitConfig {
            phi_min: 0.01,
            ..GaitConfig::default()
        };
        let err = advance(&LegPhase::start(&cfg), &cfg, 1e-3).unwrap_err();
        assert_eq!(err.key, "phi_min");
        assert!(err.constraint.contains("pi/36"));
    }

    fn phase_sequence(cfg: &GaitConfig, dt: f64, steps: usize) -> Vec<Phase> {
        let mut leg = LegPhase::start(cfg);
        let mut seq = vec![leg.phase];
        for _ in 0..steps {
            leg = advance(&leg, cfg, dt).unwrap();
            if *seq.last().unwrap() != leg.phase {
                seq.push(leg.phase);
            }
        }
        seq
    }

    #[test]
    fn cyclic_phase_order_single_pause() {
        let cfg = GaitConfig::default();
        let seq = phase_sequence(&cfg, 1e-3, 5000);
        for w in seq.windows(2) {
            let ok = matches!(
                (w[0], w[1]),
                (Phase::Inward, Phase::Outward)
                    | (Phase::Outward, Phase::Pause)
                    | (Phase::Pause, Phase::Inward)
            );
            assert!(ok, "unexpected transition {:?}", w);
        }
    }

    #[test]
    fn cyclic_phase_order_double_pause() {
        let cfg = GaitConfig {
            pause_placement: PausePlacement::BeforeBoth,
            ..GaitConfig::default()
        };
        let seq = phase_sequence(&cfg, 1e-3, 5000);
        let expected = [Phase::Inward, Phase::Pause, Phase::Outward, Phase::Pause];
        for (i, p) in seq.iter().enumerate() {
            assert_eq!(*p, expected[i % 4]);
        }
    }

    #[test]
    fn symmetric_triangle_wave() {
        let cfg = GaitConfig {
            omega_in: 1.0,
            omega_out: 1.0,
            pause_s: 0.0,
            ..GaitConfig::default()
        };
        let dt = 1e-3;
        let half = cfg.amplitude() / cfg.omega_in;
        let mut leg = LegPhase::start(&cfg);
        let mut t = 0.0;
        for _ in 0..3000 {
            leg = advance(&leg, &cfg, dt).unwrap();
            t += dt;
            let period = 2.0 * half;
            let u = (t % period) / half;
            let expected = if u <= 1.0 {
                cfg.phi_max - cfg.amplitude() * u
            } else {
                cfg.phi_min + cfg.amplitude() * (u - 1.0)
            };
            assert_abs_diff_eq!(leg.phi, expected, epsilon = 1e-9);
        }
    }

    proptest! {
        #[test]
        fn phi_stays_in_range(dts in proptest::collection::vec(1e-5..0.05f64, 1..400)) {
            let cfg = GaitConfig::default();
            let mut leg = LegPhase::start(&cfg);
            for dt in dts {
                leg = advance(&leg, &cfg, dt).unwrap();
                prop_assert!(leg.phi >= cfg.phi_min && leg.phi <= cfg.phi_max);
            }
        }

        #[test]
        fn cycle_time_matches_period(dt in 1e-4..5e-3f64, omega_in in 0.78..2.34f64) {
            let cfg = GaitConfig { omega_in, ..GaitConfig::default() };
            let mut leg = LegPhase::start(&cfg);
            let mut t = 0.0;
            let mut starts = Vec::new();
            let mut prev = leg.phase;
            while starts.len() < 3 {
                leg = advance(&leg, &cfg, dt).unwrap();
                t += dt;
                if prev == Phase::Pause && leg.phase == Phase::Inward {
                    starts.push(t);
                }
                prev = leg.phase;
            }
            let measured = starts[2] - starts[1];
            prop_assert!((measured - cycle_period(&cfg)).abs() <= dt + 1e-9);
        }
    }
}
