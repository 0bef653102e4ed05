//! Planar land dynamics of the swing-leg robot.
//!
//! Every function here is a pure function of its arguments. Angles are in
//! radians, forces in newtons, speeds in m/s. `phi` is the angle between a
//! leg and the heading direction, `beta` the signed deflection of the
//! anti-bias wheel relative to the leg.
//!
//! The wheel mounting enters through [`WheelMode`]: a reversed wheel sees
//! `beta` negated, and its anti-bias force pushes the robot backwards, so
//! thrust-dependent terms use `sin(beta) * sin(phi + s * beta)` with `s` the
//! mounting sign.

use crate::error::{DynamicsError, ParamError};
use crate::params::{RobotParams, TerrainParams, WheelMode};

/// `Vp * cos(phi)` below this routes the deflection law to its capped branch.
pub const DEFLECTION_EPS: f64 = 1e-6;

/// Speeds at or below this magnitude count as "at rest" for stiction.
pub const STICTION_EPS: f64 = 1e-9;

/// Largest wheel deflection before the anti-bias force exceeds sliding
/// friction: `asin(mu_slide / tan(tilt))`.
pub fn slide_limit_beta(params: &RobotParams) -> Result<f64, DynamicsError> {
    let tan_tilt = params.tilt_angle.tan();
    if !(tan_tilt > 0.0) || tan_tilt < params.mu_slide || params.mu_slide < 0.0 {
        return Err(ParamError::new(
            "mu_slide",
            "must lie in [0, tan(tilt_angle)] for a sliding limit angle to exist",
        )
        .into());
    }
    Ok((params.mu_slide / tan_tilt).asin())
}

/// Wheel deflection during the inward (propulsive) swing.
///
/// Follows the no-slip kinematics `atan((w L - Vp sin phi) / (Vp cos phi))`
/// and saturates at the sliding limit. When the limit equals pi/4 the
/// saturation switches exactly where `w L = sqrt(2) Vp sin(phi + pi/4)`.
pub fn deflection_inward(
    phi: f64,
    omega: f64,
    vp: f64,
    params: &RobotParams,
) -> Result<f64, DynamicsError> {
    let beta_max = slide_limit_beta(params)?;
    let along = vp * phi.cos();
    if along < DEFLECTION_EPS {
        return Ok(beta_max);
    }
    let lateral = omega * params.sweep_arm - vp * phi.sin();
    Ok((lateral / along).atan().clamp(-beta_max, beta_max))
}

/// Wheel deflection during the outward (recovery) swing. Mirror of
/// [`deflection_inward`] with the swing velocity adding to the platform's.
pub fn deflection_outward(
    phi: f64,
    omega: f64,
    vp: f64,
    params: &RobotParams,
) -> Result<f64, DynamicsError> {
    let beta_max = slide_limit_beta(params)?;
    let along = vp * phi.cos();
    if along < DEFLECTION_EPS {
        return Ok(-beta_max);
    }
    let lateral = omega * params.sweep_arm + vp * phi.sin();
    Ok((-(lateral / along).atan()).clamp(-beta_max, beta_max))
}

/// Map a deflection computed for forward mounting onto the actual wheel.
pub fn apply_wheel_mode(beta: f64, mode: WheelMode) -> f64 {
    match mode {
        WheelMode::Forward => beta,
        WheelMode::Reversed => -beta,
    }
}

fn thrust_factor(phi: f64, beta: f64, mode: WheelMode) -> f64 {
    beta.sin() * (phi + mode.sign() * beta).sin()
}

fn support_denominator(phi: f64, beta: f64, mode: WheelMode, params: &RobotParams) -> f64 {
    2.0 * params.head_link_length * params.head_link_angle.cos()
        + 2.0 * params.leg_length * phi.cos()
        - 2.0 * params.tilt_angle.tan() * thrust_factor(phi, beta, mode) * params.barycenter_height
}

/// Normal force carried by each anti-bias wheel (N).
///
/// Weight terms are scaled by `cos(slope)`. Fails when the thrust moment
/// about the front wheel would lift the legs off the ground.
pub fn normal_force(
    phi: f64,
    beta: f64,
    mode: WheelMode,
    params: &RobotParams,
    terrain: &TerrainParams,
) -> Result<f64, DynamicsError> {
    let denominator = support_denominator(phi, beta, mode, params);
    if !(denominator > 0.0) {
        return Err(DynamicsError::Singular {
            phi,
            beta,
            denominator,
        });
    }
    let numerator = params.platform_weight * params.barycenter_offset
        + 2.0 * params.leg_weight * params.head_link_length * params.head_link_angle.cos()
        + 2.0 * params.leg_weight * params.leg_length * phi.cos();
    Ok(terrain.slope.cos() * numerator / denominator)
}

/// Anti-bias force of a single wheel, orthogonal to its rolling direction.
pub fn anti_bias_force(normal: f64, beta: f64, params: &RobotParams) -> f64 {
    normal * params.tilt_angle.tan() * beta.sin()
}

/// Propulsion of both legs along the heading (N), signed.
pub fn forward_thrust(
    normal: f64,
    phi: f64,
    beta: f64,
    mode: WheelMode,
    params: &RobotParams,
) -> f64 {
    2.0 * normal * params.tilt_angle.tan() * thrust_factor(phi, beta, mode)
}

/// Magnitude of the Coulomb-type resistance: rolling friction of all three
/// wheels plus the front brake when engaged (N).
pub fn rolling_resistance(
    normal: f64,
    phi: f64,
    beta: f64,
    mode: WheelMode,
    params: &RobotParams,
    terrain: &TerrainParams,
) -> f64 {
    let front_load = (params.total_weight() * terrain.slope.cos() - 2.0 * normal).max(0.0);
    let legs = 2.0 * normal * params.mu_roll * (phi + mode.sign() * beta).cos();
    let brake = if terrain.brake_engaged {
        terrain.mu_brake * front_load
    } else {
        0.0
    };
    front_load * params.mu_roll + legs + brake
}

/// Total resistance opposing forward motion: rolling, brake and air drag (N).
pub fn resistance(
    normal: f64,
    phi: f64,
    beta: f64,
    vp: f64,
    mode: WheelMode,
    params: &RobotParams,
    terrain: &TerrainParams,
) -> f64 {
    rolling_resistance(normal, phi, beta, mode, params, terrain) + params.air_drag * vp
}

/// All forces along the heading for one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceBalance {
    pub normal: f64,
    pub thrust: f64,
    /// Rolling plus brake resistance, always >= 0.
    pub rolling: f64,
    /// Signed air drag `K * Vp`.
    pub air: f64,
    /// Gravity component along the heading, positive when pulling backwards.
    pub gravity_along: f64,
    pub total_weight: f64,
    pub g: f64,
}

impl ForceBalance {
    /// Resistance as reported in traces: rolling plus air drag.
    pub fn resistance(&self) -> f64 {
        self.rolling + self.air
    }

    /// Newton's law without any stiction handling, valid while moving forward.
    pub fn raw_acceleration(&self) -> f64 {
        (self.thrust - self.rolling - self.air - self.gravity_along) * self.g / self.total_weight
    }

    /// Acceleration with rolling resistance treated as Coulomb friction: it
    /// always opposes the motion, and at rest it holds the robot unless the
    /// remaining forces overcome it.
    pub fn acceleration(&self, vp: f64) -> f64 {
        let drive = self.thrust - self.air - self.gravity_along;
        let net = if vp > STICTION_EPS {
            drive - self.rolling
        } else if vp < -STICTION_EPS {
            drive + self.rolling
        } else if drive.abs() <= self.rolling {
            0.0
        } else {
            drive - self.rolling.copysign(drive)
        };
        net * self.g / self.total_weight
    }
}

pub fn force_balance(
    phi: f64,
    beta: f64,
    vp: f64,
    mode: WheelMode,
    params: &RobotParams,
    terrain: &TerrainParams,
) -> Result<ForceBalance, DynamicsError> {
    let normal = normal_force(phi, beta, mode, params, terrain)?;
    let total_weight = params.total_weight();
    Ok(ForceBalance {
        normal,
        thrust: forward_thrust(normal, phi, beta, mode, params),
        rolling: rolling_resistance(normal, phi, beta, mode, params, terrain),
        air: params.air_drag * vp,
        gravity_along: total_weight * terrain.slope.sin(),
        total_weight,
        g: params.gravity,
    })
}

/// Platform acceleration obtained by composing normal force, thrust and
/// resistance, with the stiction clamp applied at rest.
pub fn acceleration_pipeline(
    phi: f64,
    beta: f64,
    vp: f64,
    mode: WheelMode,
    params: &RobotParams,
    terrain: &TerrainParams,
) -> Result<f64, DynamicsError> {
    Ok(force_balance(phi, beta, vp, mode, params, terrain)?.acceleration(vp))
}

/// The boxed closed-form acceleration on flat ground with forward wheels.
/// No stiction clamp: at rest with `beta = 0` it still reports the rolling
/// drag as a deceleration.
pub fn acceleration_closed_form(
    phi: f64,
    beta: f64,
    vp: f64,
    params: &RobotParams,
) -> Result<f64, DynamicsError> {
    let denominator = support_denominator(phi, beta, WheelMode::Forward, params);
    if !(denominator > 0.0) {
        return Err(DynamicsError::Singular {
            phi,
            beta,
            denominator,
        });
    }
    let gp = params.platform_weight;
    let g_leg = params.leg_weight;
    let w = params.total_weight();
    let mu = params.mu_roll;
    let moment = gp * params.barycenter_offset
        + 2.0 * g_leg * params.head_link_length * params.head_link_angle.cos()
        + 2.0 * g_leg * params.leg_length * phi.cos();
    let traction = 2.0 * mu - 2.0 * (phi + beta).cos() * mu
        + 2.0 * params.tilt_angle.tan() * beta.sin() * (phi + beta).sin();
    Ok((moment * traction / (denominator * w) - params.air_drag * vp / w - mu) * params.gravity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn table() -> RobotParams {
        RobotParams::default()
    }

    fn flat() -> TerrainParams {
        TerrainParams::flat()
    }

    const FWD: WheelMode = WheelMode::Forward;

    #[test]
    fn slide_limit_table_values_near_quarter_pi() {
        let b = slide_limit_beta(&table()).unwrap();
        assert_abs_diff_eq!(b, FRAC_PI_4, epsilon = 0.01);
    }

    #[test]
    fn slide_limit_zero_friction() {
        let p = RobotParams {
            mu_slide: 0.0,
            mu_roll: 0.0,
            ..table()
        };
        assert_eq!(slide_limit_beta(&p).unwrap(), 0.0);
    }

    #[test]
    fn slide_limit_at_45_degree_tilt() {
        let p = RobotParams {
            tilt_angle: FRAC_PI_4,
            ..table()
        };
        // asin(0.25 / 1)
        assert_abs_diff_eq!(slide_limit_beta(&p).unwrap(), 0.252_680_255, epsilon = 1e-8);
    }

    #[test]
    fn slide_limit_rejects_steep_friction() {
        let p = RobotParams {
            mu_slide: 0.5,
            ..table()
        };
        assert!(matches!(
            slide_limit_beta(&p),
            Err(DynamicsError::Params(_))
        ));
    }

    #[test]
    fn inward_from_rest_is_capped() {
        let b = deflection_inward(0.5, 2.0, 0.0, &table()).unwrap();
        assert_eq!(b, slide_limit_beta(&table()).unwrap());
        assert_abs_diff_eq!(b, FRAC_PI_4, epsilon = 0.01);
    }

    #[test]
    fn inward_without_swing_aligns_with_travel() {
        let b = deflection_inward(0.5, 0.0, 0.5, &table()).unwrap();
        assert_abs_diff_eq!(b, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn inward_at_switching_boundary() {
        // w L = Vp (sin phi + cos phi): the kinematic branch hits atan(1).
        let phi: f64 = 0.5;
        let vp = 0.5;
        let wl = vp * (phi.sin() + phi.cos());
        assert_abs_diff_eq!(wl, 0.6785, epsilon = 1e-4);
        // With the sliding limit exactly pi/4 the law is continuous at pi/4.
        let tilt = table().tilt_angle;
        let p = RobotParams {
            mu_slide: tilt.tan() * FRAC_PI_4.sin(),
            ..table()
        };
        let b = deflection_inward(phi, wl / p.sweep_arm, vp, &p).unwrap();
        assert_abs_diff_eq!(b, FRAC_PI_4, epsilon = 1e-12);
        // With the table friction the cap is the sliding limit.
        let b = deflection_inward(phi, wl / 0.3, vp, &table()).unwrap();
        assert_abs_diff_eq!(b, slide_limit_beta(&table()).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn outward_without_swing_aligns_with_travel() {
        let b = deflection_outward(0.5, 0.0, 0.5, &table()).unwrap();
        assert_abs_diff_eq!(b, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn outward_from_rest_is_capped() {
        let b = deflection_outward(0.3, 1.0, 0.0, &table()).unwrap();
        assert_eq!(b, -slide_limit_beta(&table()).unwrap());
    }

    #[test]
    fn outward_above_threshold_is_capped() {
        // threshold sqrt(2) * 0.4 * cos(0.3 + pi/4) = 0.2639 < 0.3
        let threshold = 2f64.sqrt() * 0.4 * (0.3 + FRAC_PI_4).cos();
        assert_abs_diff_eq!(threshold, 0.2639, epsilon = 1e-4);
        let b = deflection_outward(0.3, 1.0, 0.4, &table()).unwrap();
        assert_abs_diff_eq!(b, -FRAC_PI_4, epsilon = 0.01);
        assert_eq!(b, -slide_limit_beta(&table()).unwrap());
    }

    #[test]
    fn normal_force_straight_wheel() {
        // numerator 12.313 / denominator 0.95526
        let n = normal_force(PI / 5.0, 0.0, FWD, &table(), &flat()).unwrap();
        assert_abs_diff_eq!(n, 12.89, epsilon = 0.01);
    }

    #[test]
    fn normal_force_deflected_wheel() {
        let n = normal_force(PI / 5.0, FRAC_PI_4, FWD, &table(), &flat()).unwrap();
        assert_abs_diff_eq!(n, 13.59, epsilon = 0.01);
    }

    #[test]
    fn normal_force_without_tilt_ignores_beta() {
        let p = RobotParams {
            tilt_angle: 0.0,
            ..table()
        };
        let n0 = normal_force(0.6, 0.0, FWD, &p, &flat()).unwrap();
        for beta in [-0.7, -0.2, 0.3, 0.78] {
            assert_eq!(normal_force(0.6, beta, FWD, &p, &flat()).unwrap(), n0);
        }
    }

    #[test]
    fn normal_force_singular_configuration() {
        let p = RobotParams {
            barycenter_height: 10.0,
            ..table()
        };
        let err = normal_force(PI / 5.0, FRAC_PI_4, FWD, &p, &flat()).unwrap_err();
        assert!(matches!(err, DynamicsError::Singular { .. }));
    }

    #[test]
    fn anti_bias_force_values() {
        let f = anti_bias_force(13.59, FRAC_PI_4, &table());
        assert_abs_diff_eq!(f, 3.40, epsilon = 0.01);
        assert_eq!(anti_bias_force(13.59, 0.0, &table()), 0.0);
        assert_eq!(
            anti_bias_force(13.59, -0.4, &table()),
            -anti_bias_force(13.59, 0.4, &table())
        );
    }

    #[test]
    fn forward_thrust_values() {
        let f = forward_thrust(13.59, PI / 5.0, FRAC_PI_4, FWD, &table());
        assert_abs_diff_eq!(f, 6.72, epsilon = 0.01);
        assert_eq!(forward_thrust(13.59, PI / 5.0, 0.0, FWD, &table()), 0.0);
        assert_abs_diff_eq!(
            forward_thrust(13.59, 0.6, -0.6, FWD, &table()),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn resistance_values() {
        let f = resistance(12.89, PI / 5.0, 0.0, 0.0, FWD, &table(), &flat());
        assert_abs_diff_eq!(f, 1.08, epsilon = 0.01);
        let f = resistance(12.89, PI / 5.0, 0.0, 0.5, FWD, &table(), &flat());
        assert_abs_diff_eq!(f, 1.13, epsilon = 0.01);
        let p = RobotParams {
            mu_roll: 0.0,
            air_drag: 0.0,
            ..table()
        };
        assert_eq!(resistance(12.89, PI / 5.0, 0.3, 0.7, FWD, &p, &flat()), 0.0);
    }

    #[test]
    fn brake_loads_front_wheel() {
        let braked = TerrainParams {
            brake_engaged: true,
            ..flat()
        };
        let n = 12.89;
        let free = resistance(n, PI / 5.0, 0.0, 0.0, FWD, &table(), &flat());
        let with_brake = resistance(n, PI / 5.0, 0.0, 0.0, FWD, &table(), &braked);
        assert_abs_diff_eq!(with_brake - free, 0.4 * (58.8 - 2.0 * n), epsilon = 1e-9);
    }

    #[test]
    fn pipeline_from_rest_with_capped_wheel() {
        let a = acceleration_pipeline(PI / 5.0, FRAC_PI_4, 0.0, FWD, &table(), &flat()).unwrap();
        assert_abs_diff_eq!(a, 1.00, epsilon = 0.01);
    }

    #[test]
    fn pipeline_stiction_holds_at_rest() {
        let a = acceleration_pipeline(PI / 5.0, 0.0, 0.0, FWD, &table(), &flat()).unwrap();
        assert_eq!(a, 0.0);
    }

    #[test]
    fn pipeline_uphill_beyond_thrust_decelerates() {
        let slope = TerrainParams::with_slope(0.3);
        let a = acceleration_pipeline(PI / 5.0, FRAC_PI_4, 0.2, FWD, &table(), &slope).unwrap();
        assert!(a < 0.0);
    }

    #[test]
    fn closed_form_matches_pipeline_value() {
        let a = acceleration_closed_form(PI / 5.0, FRAC_PI_4, 0.0, &table()).unwrap();
        assert_abs_diff_eq!(a, 1.00, epsilon = 0.01);
    }

    #[test]
    fn closed_form_reports_unclamped_drag_at_rest() {
        let a = acceleration_closed_form(PI / 5.0, 0.0, 0.0, &table()).unwrap();
        // with beta = 0 there is no thrust, only rolling drag on all wheels
        let p = table();
        let n = normal_force(
            PI / 5.0,
            0.0,
            WheelMode::Forward,
            &p,
            &TerrainParams::flat(),
        )
        .unwrap();
        let w = p.total_weight();
        let drag = ((w - 2.0 * n) + 2.0 * n * (PI / 5.0).cos()) * p.mu_roll;
        assert_abs_diff_eq!(a, -drag * p.gravity / w, epsilon = 1e-12);
        assert_abs_diff_eq!(a, -0.180, epsilon = 1e-3);
    }

    #[test]
    fn wheel_mode_application() {
        assert_eq!(apply_wheel_mode(FRAC_PI_4, WheelMode::Reversed), -FRAC_PI_4);
        assert_eq!(apply_wheel_mode(0.0, WheelMode::Reversed), 0.0);
        assert_eq!(apply_wheel_mode(0.0, WheelMode::Forward), 0.0);
        let b = 0.37;
        assert_eq!(
            apply_wheel_mode(
                apply_wheel_mode(b, WheelMode::Reversed),
                WheelMode::Reversed
            ),
            b
        );
    }

    proptest! {
        #[test]
        fn closed_form_equals_pipeline(
            phi in 3.0 * PI / 20.0..=11.0 * PI / 40.0,
            beta in -FRAC_PI_4..=FRAC_PI_4,
            vp in 0.0..=1.5f64,
        ) {
            let p = table();
            let closed = acceleration_closed_form(phi, beta, vp, &p).unwrap();
            let piped = force_balance(phi, beta, vp, FWD, &p, &flat()).unwrap().raw_acceleration();
            prop_assert!((closed - piped).abs() <= 1e-9 * closed.abs().max(1.0));
        }

        #[test]
        fn sliding_limit_identity(tilt in 0.05..1.5f64, frac in 0.0..=1.0f64) {
            let mu_slide = tilt.tan() * frac;
            let p = RobotParams { tilt_angle: tilt, mu_slide, mu_roll: 0.0, ..table() };
            let b = slide_limit_beta(&p).unwrap();
            prop_assert!((tilt.tan() * b.sin() - mu_slide).abs() <= 1e-12);
        }

        #[test]
        fn thrust_increases_with_beta(
            phi in 3.0 * PI / 20.0..=11.0 * PI / 40.0,
            lo in 0.0..1.0f64,
            hi in 0.0..1.0f64,
        ) {
            let p = table();
            let upper = slide_limit_beta(&p).unwrap().min(PI / 2.0 - phi);
            let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
            prop_assume!(b - a > 1e-6);
            let (b1, b2) = (a * upper, b * upper);
            prop_assume!(b1 > 0.0);
            let f1 = forward_thrust(13.0, phi, b1, FWD, &p);
            let f2 = forward_thrust(13.0, phi, b2, FWD, &p);
            prop_assert!(f2 > f1);
        }

        #[test]
        fn anti_bias_force_is_odd(n in 0.0..30.0f64, beta in -1.5..1.5f64) {
            let p = table();
            prop_assert_eq!(anti_bias_force(n, -beta, &p), -anti_bias_force(n, beta, &p));
        }

        #[test]
        fn reversed_mounting_negates_thrust(
            phi in 3.0 * PI / 20.0..=11.0 * PI / 40.0,
            beta in -FRAC_PI_4..=FRAC_PI_4,
            n in 0.0..30.0f64,
        ) {
            let p = table();
            let fwd = forward_thrust(n, phi, beta, FWD, &p);
            let rev = forward_thrust(n, phi, apply_wheel_mode(beta, WheelMode::Reversed), WheelMode::Reversed, &p);
            prop_assert!((fwd + rev).abs() <= 1e-12 * fwd.abs().max(1.0));
        }

        #[test]
        fn legs_carry_less_than_total_weight(
            phi in 3.0 * PI / 20.0..=11.0 * PI / 40.0,
            beta in -FRAC_PI_4..=FRAC_PI_4,
            slope in -0.3..0.3f64,
            reversed in any::<bool>(),
        ) {
            let p = table();
            let mode = if reversed { WheelMode::Reversed } else { FWD };
            let terrain = TerrainParams::with_slope(slope);
            let n = normal_force(phi, beta, mode, &p, &terrain).unwrap();
            prop_assert!(n > 0.0);
            prop_assert!(2.0 * n < p.total_weight() * slope.cos());
        }

        #[test]
        fn deflection_is_continuous(
            phi in 3.0 * PI / 20.0..=11.0 * PI / 40.0,
            vp in 0.01..1.5f64,
            omega in 0.0..4.0f64,
        ) {
            let p = table();
            let h = 1e-8;
            let bi = deflection_inward(phi, omega, vp, &p).unwrap();
            let bi2 = deflection_inward(phi, omega + h, vp, &p).unwrap();
            prop_assert!((bi - bi2).abs() < 1e-6);
            let bo = deflection_outward(phi, omega, vp, &p).unwrap();
            let bo2 = deflection_outward(phi, omega + h, vp, &p).unwrap();
            prop_assert!((bo - bo2).abs() < 1e-6);
        }
    }
}
