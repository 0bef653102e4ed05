use thiserror::Error;

/// A parameter violated one of its domain constraints.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("`{key}` {constraint}")]
pub struct ParamError {
    pub key: String,
    pub constraint: String,
}

impl ParamError {
    pub fn new(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            constraint: constraint.into(),
        }
    }

    /// Prefix the key with a section name, e.g. `gait.phi_min`.
    pub fn in_section(mut self, section: &str) -> Self {
        self.key = format!("{section}.{}", self.key);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid parameters: {0}")]
    Params(#[from] ParamError),
    #[error(
        "singular configuration at phi={phi:.6} beta={beta:.6}: normal-force denominator {denominator:.3e} <= 0"
    )]
    Singular {
        phi: f64,
        beta: f64,
        denominator: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Params(#[from] ParamError),
    #[error("dynamics failed at t={t:.4} s (Vp={vp:.4} m/s): {source}")]
    Dynamics {
        t: f64,
        vp: f64,
        #[source]
        source: DynamicsError,
    },
    #[error("path lost at t={t:.4} s: lateral offset {offset:.4} m exceeds sensor half-span {half_span:.4} m")]
    PathLost { t: f64, offset: f64, half_span: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("design matrix is rank deficient (scaled eigenvalue ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
}
