//! Identification of the no-intercept quadratic speed model
//! `v = a1*w_in + a2*w_in^2 + a3*w_out + a4*w_out^2`.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};

use crate::error::FitError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedModel {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

impl SpeedModel {
    /// Published fit to simulated runs.
    pub const PAPER_SIM: SpeedModel = SpeedModel {
        a1: 0.4017,
        a2: -0.01561,
        a3: 0.01339,
        a4: 0.004193,
    };

    /// Published fit to hardware runs.
    pub const PAPER_EXP: SpeedModel = SpeedModel {
        a1: 0.3645,
        a2: -0.01908,
        a3: 0.06387,
        a4: -0.016930,
    };

    pub const NAMES: [&'static str; 4] = ["a1", "a2", "a3", "a4"];

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a1, self.a2, self.a3, self.a4]
    }

    pub fn from_coefficients(c: [f64; 4]) -> Self {
        Self {
            a1: c[0],
            a2: c[1],
            a3: c[2],
            a4: c[3],
        }
    }
}

/// Predicted steady speed (m/s).
pub fn evaluate(model: &SpeedModel, omega_in: f64, omega_out: f64) -> f64 {
    model.a1 * omega_in
        + model.a2 * omega_in * omega_in
        + model.a3 * omega_out
        + model.a4 * omega_out * omega_out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedSample {
    pub omega_in: f64,
    pub omega_out: f64,
    pub v: f64,
}

impl SpeedSample {
    pub fn new(omega_in: f64, omega_out: f64, v: f64) -> Self {
        Self {
            omega_in,
            omega_out,
            v,
        }
    }

    fn features(&self) -> Vector4<f64> {
        Vector4::new(
            self.omega_in,
            self.omega_in * self.omega_in,
            self.omega_out,
            self.omega_out * self.omega_out,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub model: SpeedModel,
    /// Root-mean-square residual on the training samples (m/s).
    pub residual_rms: f64,
    /// Standard error of each coefficient; NaN with no residual degrees of
    /// freedom.
    pub stderr: [f64; 4],
    pub samples: usize,
}

// Smallest accepted eigenvalue ratio of the scaled normal matrix.
const RANK_TOL: f64 = 1e-12;

/// Least-squares fit by column-scaled normal equations.
pub fn fit_speed_model(samples: &[SpeedSample]) -> Result<FitReport, FitError> {
    if samples.len() < 4 {
        return Err(FitError::TooFewSamples {
            needed: 4,
            got: samples.len(),
        });
    }
    if let Some(index) = samples
        .iter()
        .position(|s| !(s.omega_in.is_finite() && s.omega_out.is_finite() && s.v.is_finite()))
    {
        return Err(FitError::NonFinite { index });
    }

    let n = samples.len() as f64;
    let mut scale = Vector4::zeros();
    for s in samples {
        scale += s.features().component_mul(&s.features());
    }
    let scale = scale.map(|ss| (ss / n).sqrt());
    if scale.iter().any(|&c| c == 0.0) {
        return Err(FitError::RankDeficient { ratio: 0.0 });
    }

    let mut normal = Matrix4::zeros();
    let mut rhs = Vector4::zeros();
    for s in samples {
        let x = s.features().component_div(&scale);
        normal += x * x.transpose();
        rhs += x * s.v;
    }

    let eigen = SymmetricEigen::new(normal);
    let max = eigen.eigenvalues.max();
    let min = eigen.eigenvalues.min();
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if !(ratio > RANK_TOL) {
        return Err(FitError::RankDeficient { ratio });
    }
    let chol = normal.cholesky().ok_or(FitError::RankDeficient { ratio })?;
    let scaled = chol.solve(&rhs);
    let coef = scaled.component_div(&scale);
    let model = SpeedModel::from_coefficients([coef[0], coef[1], coef[2], coef[3]]);

    let ssr: f64 = samples
        .iter()
        .map(|s| (s.v - evaluate(&model, s.omega_in, s.omega_out)).powi(2))
        .sum();
    let dof = samples.len().saturating_sub(4);
    let inverse = chol.inverse();
    let stderr = std::array::from_fn(|i| {
        if dof == 0 {
            f64::NAN
        } else {
            (ssr / dof as f64 * inverse[(i, i)]).sqrt() / scale[i]
        }
    });
    Ok(FitReport {
        model,
        residual_rms: (ssr / n).sqrt(),
        stderr,
        samples: samples.len(),
    })
}

/// Swing speeds spanning the published sweeps.
pub const DEFAULT_OMEGA_IN: [f64; 5] = [0.78, 1.17, 1.56, 1.95, 2.34];
pub const DEFAULT_OMEGA_OUT: [f64; 4] = [0.78, 1.1, 1.4, 1.755];

/// Cartesian product of the default swing speeds, `omega_in` outermost.
pub fn default_grid() -> Vec<(f64, f64)> {
    DEFAULT_OMEGA_IN
        .iter()
        .flat_map(|&wi| DEFAULT_OMEGA_OUT.iter().map(move |&wo| (wi, wo)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    /// Largest absolute speed difference on the grid (m/s).
    pub max_abs: f64,
    pub rms: f64,
}

/// Velocity-space discrepancy between two models over a grid of swing speeds.
pub fn compare(model: &SpeedModel, reference: &SpeedModel, grid: &[(f64, f64)]) -> Comparison {
    if grid.is_empty() {
        return Comparison {
            max_abs: 0.0,
            rms: 0.0,
        };
    }
    let diffs: Vec<f64> = grid
        .iter()
        .map(|&(wi, wo)| evaluate(model, wi, wo) - evaluate(reference, wi, wo))
        .collect();
    Comparison {
        max_abs: diffs.iter().fold(0.0, |m, d| m.max(d.abs())),
        rms: (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn synth(model: &SpeedModel, grid: &[(f64, f64)]) -> Vec<SpeedSample> {
        grid.iter()
            .map(|&(wi, wo)| SpeedSample::new(wi, wo, evaluate(model, wi, wo)))
            .collect()
    }

    fn rms(model: &SpeedModel, samples: &[SpeedSample]) -> f64 {
        let ss: f64 = samples
            .iter()
            .map(|s| (s.v - evaluate(model, s.omega_in, s.omega_out)).powi(2))
            .sum();
        (ss / samples.len() as f64).sqrt()
    }

    #[test]
    fn evaluates_published_models() {
        assert_abs_diff_eq!(
            evaluate(&SpeedModel::PAPER_SIM, 1.17, 0.975),
            0.4657,
            epsilon = 5e-4
        );
        assert_abs_diff_eq!(
            evaluate(&SpeedModel::PAPER_EXP, 1.17, 0.975),
            0.4465,
            epsilon = 5e-4
        );
        assert_eq!(evaluate(&SpeedModel::PAPER_SIM, 0.0, 0.0), 0.0);
    }

    #[test]
    fn recovers_published_coefficients() {
        let fit = fit_speed_model(&synth(&SpeedModel::PAPER_SIM, &default_grid())).unwrap();
        for (got, want) in fit
            .model
            .coefficients()
            .iter()
            .zip(SpeedModel::PAPER_SIM.coefficients())
        {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn zero_data_fits_zero() {
        let samples: Vec<_> = default_grid()
            .into_iter()
            .map(|(wi, wo)| SpeedSample::new(wi, wo, 0.0))
            .collect();
        let fit = fit_speed_model(&samples).unwrap();
        assert_eq!(fit.model.coefficients(), [0.0; 4]);
    }

    #[test]
    fn duplicated_data_fits_the_same() {
        let mut samples: Vec<_> = default_grid()
            .into_iter()
            .enumerate()
            .map(|(i, (wi, wo))| SpeedSample::new(wi, wo, 0.3 * wi + 0.01 * (i % 3) as f64))
            .collect();
        let once = fit_speed_model(&samples).unwrap();
        samples.extend(samples.clone());
        let twice = fit_speed_model(&samples).unwrap();
        for (a, b) in once
            .model
            .coefficients()
            .iter()
            .zip(twice.model.coefficients())
        {
            assert_abs_diff_eq!(a, &b, epsilon = 1e-10);
        }
    }

    #[test]
    fn single_point_is_rank_deficient() {
        let samples = vec![SpeedSample::new(1.17, 0.975, 0.46); 6];
        assert!(matches!(
            fit_speed_model(&samples),
            Err(FitError::RankDeficient { .. })
        ));
    }

    #[test]
    fn too_few_and_non_finite() {
        let s = SpeedSample::new(1.0, 1.0, 0.4);
        assert_eq!(
            fit_speed_model(&[s; 3]).unwrap_err(),
            FitError::TooFewSamples { needed: 4, got: 3 }
        );
        let mut samples = synth(&SpeedModel::PAPER_SIM, &default_grid());
        samples[5].v = f64::NAN;
        assert_eq!(
            fit_speed_model(&samples).unwrap_err(),
            FitError::NonFinite { index: 5 }
        );
    }

    #[test]
    fn published_models_agree_in_velocity() {
        let c = compare(
            &SpeedModel::PAPER_SIM,
            &SpeedModel::PAPER_EXP,
            &default_grid(),
        );
        assert!(c.max_abs < 0.1, "{}", c.max_abs);
        assert!(c.rms <= c.max_abs);
        let same = compare(
            &SpeedModel::PAPER_SIM,
            &SpeedModel::PAPER_SIM,
            &default_grid(),
        );
        assert_eq!((same.max_abs, same.rms), (0.0, 0.0));
    }

    #[test]
    fn stderr_is_nan_without_spare_samples() {
        let grid = [(0.78, 0.78), (1.56, 1.1), (2.34, 1.4), (1.17, 1.755)];
        let fit = fit_speed_model(&synth(&SpeedModel::PAPER_SIM, &grid)).unwrap();
        assert!(fit.stderr.iter().all(|e| e.is_nan()));
    }

    proptest! {
        #[test]
        fn perturbing_a_coefficient_never_helps(
            noise in prop::collection::vec(-0.02f64..0.02, 20),
            k in 0usize..4,
            up in any::<bool>(),
        ) {
            let samples: Vec<_> = default_grid()
                .into_iter()
                .zip(noise)
                .map(|((wi, wo), e)| SpeedSample::new(wi, wo, evaluate(&SpeedModel::PAPER_SIM, wi, wo) + e))
                .collect();
            let fit = fit_speed_model(&samples).unwrap();
            let base = rms(&fit.model, &samples);
            let mut c = fit.model.coefficients();
            c[k] *= if up { 1.01 } else { 0.99 };
            prop_assert!(rms(&SpeedModel::from_coefficients(c), &samples) >= base - 1e-15);
        }

        #[test]
        fn scaling_speeds_scales_coefficients(c in -5.0f64..5.0) {
            let samples = synth(&SpeedModel::PAPER_EXP, &default_grid());
            let scaled: Vec<_> = samples.iter().map(|s| SpeedSample { v: c * s.v, ..*s }).collect();
            let a = fit_speed_model(&samples).unwrap().model.coefficients();
            let b = fit_speed_model(&scaled).unwrap().model.coefficients();
            for i in 0..4 {
                prop_assert!((b[i] - c * a[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn recovers_any_model(a in prop::array::uniform4(-1.0f64..1.0)) {
            let model = SpeedModel::from_coefficients(a);
            let fit = fit_speed_model(&synth(&model, &default_grid())).unwrap();
            for (got, want) in fit.model.coefficients().iter().zip(a) {
                prop_assert!((got - want).abs() < 1e-6);
            }
        }
    }
}
