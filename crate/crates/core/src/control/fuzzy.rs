//! Mamdani fuzzy inference for online PID gain adjustment.
//!
//! Inputs (velocity error and its rate) are normalized by their universes,
//! clamped to [-1, 1] and fuzzified over seven triangular sets. Each rule
//! table maps a pair of input labels to an output label; rule strength is
//! the min of the two memberships, output sets are clipped and aggregated
//! by max, and the centroid of the aggregate is scaled into the configured
//! gain-delta range.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::pid::PidGains;
use crate::error::ParamError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    NB,
    NM,
    NS,
    ZO,
    PS,
    PM,
    PB,
}

impl Label {
    pub const ALL: [Label; 7] = [
        Label::NB,
        Label::NM,
        Label::NS,
        Label::ZO,
        Label::PS,
        Label::PM,
        Label::PB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn negate(self) -> Label {
        Label::ALL[6 - self.index()]
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::NB => "NB",
            Label::NM => "NM",
            Label::NS => "NS",
            Label::ZO => "ZO",
            Label::PS => "PS",
            Label::PM => "PM",
            Label::PB => "PB",
        };
        f.write_str(s)
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "NB" => Ok(Label::NB),
            "NM" => Ok(Label::NM),
            "NS" => Ok(Label::NS),
            "ZO" | "Z" | "ZE" => Ok(Label::ZO),
            "PS" => Ok(Label::PS),
            "PM" => Ok(Label::PM),
            "PB" => Ok(Label::PB),
            other => Err(format!("unknown fuzzy label `{other}`")),
        }
    }
}

/// A 7x7 rule grid indexed by `[error label][error-rate label]`.
///
/// Serialized as seven whitespace-separated rows, e.g. `"NB NB NM NS ZO PS PM"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct RuleTable(pub [[Label; 7]; 7]);

impl RuleTable {
    pub fn get(&self, e: usize, de: usize) -> Label {
        self.0[e][de]
    }

    /// True when `T[-e][-de] = -T[e][de]` for every cell.
    pub fn is_odd_symmetric(&self) -> bool {
        (0..7).all(|i| (0..7).all(|j| self.0[6 - i][6 - j] == self.0[i][j].negate()))
    }
}

impl TryFrom<Vec<String>> for RuleTable {
    type Error = String;

    fn try_from(rows: Vec<String>) -> Result<Self, Self::Error> {
        if rows.len() != 7 {
            return Err(format!("rule table needs 7 rows, got {}", rows.len()));
        }
        let mut grid = [[Label::ZO; 7]; 7];
        for (i, row) in rows.iter().enumerate() {
            let cells: Vec<&str> = row.split_whitespace().collect();
            if cells.len() != 7 {
                return Err(format!(
                    "rule table row {} needs 7 labels, got {}",
                    i + 1,
                    cells.len()
                ));
            }
            for (j, cell) in cells.iter().enumerate() {
                grid[i][j] = cell.parse()?;
            }
        }
        Ok(RuleTable(grid))
    }
}

impl From<RuleTable> for Vec<String> {
    fn from(table: RuleTable) -> Self {
        table
            .0
            .iter()
            .map(|row| {
                row.iter()
                    .map(|l| l.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect()
    }
}

use Label::*;

/// Proportional gain grows with the sum of error and error rate.
pub const DEFAULT_KP_RULES: RuleTable = RuleTable([
    [NB, NB, NB, NB, NM, NS, ZO],
    [NB, NB, NB, NM, NS, ZO, PS],
    [NB, NB, NM, NS, ZO, PS, PM],
    [NB, NM, NS, ZO, PS, PM, PB],
    [NM, NS, ZO, PS, PM, PB, PB],
    [NS, ZO, PS, PM, PB, PB, PB],
    [ZO, PS, PM, PB, PB, PB, PB],
]);

/// Integral gain follows the error, weighted twice the error rate.
pub const DEFAULT_KI_RULES: RuleTable = RuleTable([
    [NB, NB, NB, NB, NB, NM, NM],
    [NB, NB, NB, NM, NM, NS, NS],
    [NB, NM, NM, NS, NS, ZO, PS],
    [NM, NS, NS, ZO, PS, PS, PM],
    [NS, ZO, PS, PS, PM, PM, PB],
    [PS, PS, PM, PM, PB, PB, PB],
    [PM, PM, PB, PB, PB, PB, PB],
]);

/// Derivative gain follows the error rate, weighted twice the error.
pub const DEFAULT_KD_RULES: RuleTable = RuleTable([
    [NB, NB, NB, NM, NS, PS, PM],
    [NB, NB, NM, NS, ZO, PS, PM],
    [NB, NB, NM, NS, PS, PM, PB],
    [NB, NM, NS, ZO, PS, PM, PB],
    [NB, NM, NS, PS, PM, PB, PB],
    [NM, NS, ZO, PS, PM, PB, PB],
    [NM, NS, PS, PM, PB, PB, PB],
]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuzzyConfig {
    /// Error magnitude mapped to full PB/NB membership (m/s).
    pub error_range: f64,
    /// Error-rate magnitude mapped to full PB/NB membership (m/s^2).
    pub derror_range: f64,
    /// Centers of the seven sets on the normalized universe [-1, 1].
    pub centers: [f64; 7],
    pub rules_kp: RuleTable,
    pub rules_ki: RuleTable,
    pub rules_kd: RuleTable,
    /// Half-widths of the gain adjustments: outputs lie in [-range, range].
    pub dkp_range: f64,
    pub dki_range: f64,
    pub dkd_range: f64,
    pub base_gains: PidGains,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self {
            error_range: 0.3,
            derror_range: 2.0,
            centers: [-1.0, -2.0 / 3.0, -1.0 / 3.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
            rules_kp: DEFAULT_KP_RULES,
            rules_ki: DEFAULT_KI_RULES,
            rules_kd: DEFAULT_KD_RULES,
            dkp_range: 1.0,
            dki_range: 1.0,
            dkd_range: 0.02,
            base_gains: PidGains {
                kp: 2.0,
                ki: 2.0,
                kd: 0.02,
                output_min: 0.78,
                output_max: 2.34,
                integral_limit: 2.34,
            },
        }
    }
}

impl FuzzyConfig {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.error_range > 0.0 && self.error_range.is_finite()) {
            return Err(ParamError::new("error_range", "must be > 0"));
        }
        if !(self.derror_range > 0.0 && self.derror_range.is_finite()) {
            return Err(ParamError::new("derror_range", "must be > 0"));
        }
        if self.centers.iter().any(|c| !c.is_finite()) {
            return Err(ParamError::new("centers", "must be finite"));
        }
        if self.centers.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ParamError::new("centers", "must be strictly increasing"));
        }
        if self.centers[0] > -1.0 || self.centers[6] < 1.0 {
            return Err(ParamError::new(
                "centers",
                "outer sets must reach the ends of the universe [-1, 1]",
            ));
        }
        for (key, v) in [
            ("dkp_range", self.dkp_range),
            ("dki_range", self.dki_range),
            ("dkd_range", self.dkd_range),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ParamError::new(key, "must be >= 0"));
            }
        }
        self.base_gains
            .validate()
            .map_err(|e| e.in_section("base_gains"))
    }

    /// Feet of set `i`: the neighbouring centers, mirrored at the ends.
    fn triangle(&self, i: usize) -> (f64, f64, f64) {
        let c = &self.centers;
        let left = if i == 0 { 2.0 * c[0] - c[1] } else { c[i - 1] };
        let right = if i == 6 { 2.0 * c[6] - c[5] } else { c[i + 1] };
        (left, c[i], right)
    }

    fn memberships(&self, x: f64) -> [f64; 7] {
        let mut mu = [0.0; 7];
        for (i, m) in mu.iter_mut().enumerate() {
            *m = triangular(x, self.triangle(i));
        }
        mu
    }
}

fn triangular(x: f64, (a, b, c): (f64, f64, f64)) -> f64 {
    if x <= a || x >= c {
        if x == b {
            1.0
        } else {
            0.0
        }
    } else if x <= b {
        (x - a) / (b - a)
    } else {
        (c - x) / (c - b)
    }
}

/// Gain adjustments produced by one inference.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GainDelta {
    pub dkp: f64,
    pub dki: f64,
    pub dkd: f64,
}

const CENTROID_SAMPLES: usize = 401;

fn infer(cfg: &FuzzyConfig, table: &RuleTable, mu_e: &[f64; 7], mu_de: &[f64; 7]) -> f64 {
    let mut clip = [0.0f64; 7];
    for (i, &me) in mu_e.iter().enumerate() {
        if me == 0.0 {
            continue;
        }
        for (j, &md) in mu_de.iter().enumerate() {
            let w = me.min(md);
            if w > 0.0 {
                let out = table.get(i, j).index();
                clip[out] = clip[out].max(w);
            }
        }
    }
    let lo = cfg.triangle(0).0;
    let hi = cfg.triangle(6).2;
    let step = (hi - lo) / (CENTROID_SAMPLES - 1) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    // Walk inward from both ends so a symmetric aggregate sums symmetrically.
    let mut accumulate = |k: usize| {
        let y = lo + step * k as f64;
        let mut m = 0.0f64;
        for (s, &h) in clip.iter().enumerate() {
            if h > 0.0 {
                m = m.max(triangular(y, cfg.triangle(s)).min(h));
            }
        }
        num += m * y;
        den += m;
    };
    for k in 0..CENTROID_SAMPLES / 2 {
        accumulate(k);
        accumulate(CENTROID_SAMPLES - 1 - k);
    }
    accumulate(CENTROID_SAMPLES / 2);
    if den <= 0.0 {
        return 0.0;
    }
    let centroid = num / den;
    // Map [c0, c6] onto [-1, 1].
    let (c0, c6) = (cfg.centers[0], cfg.centers[6]);
    (2.0 * (centroid - c0) / (c6 - c0) - 1.0).clamp(-1.0, 1.0)
}

/// Fuzzy gain adjustment for velocity error `e` (m/s) and its rate `de` (m/s^2).
pub fn fuzzy_adjust(e: f64, de: f64, cfg: &FuzzyConfig) -> Result<GainDelta, ParamError> {
    cfg.validate()?;
    Ok(fuzzy_adjust_unchecked(e, de, cfg))
}

/// [`fuzzy_adjust`] for a configuration already validated by the caller.
pub fn fuzzy_adjust_unchecked(e: f64, de: f64, cfg: &FuzzyConfig) -> GainDelta {
    let norm = |x: f64, range: f64| {
        if x.is_nan() {
            0.0
        } else {
            (x / range).clamp(-1.0, 1.0)
        }
    };
    let mu_e = cfg.memberships(norm(e, cfg.error_range));
    let mu_de = cfg.memberships(norm(de, cfg.derror_range));
    GainDelta {
        dkp: infer(cfg, &cfg.rules_kp, &mu_e, &mu_de) * cfg.dkp_range,
        dki: infer(cfg, &cfg.rules_ki, &mu_e, &mu_de) * cfg.dki_range,
        dkd: infer(cfg, &cfg.rules_kd, &mu_e, &mu_de) * cfg.dkd_range,
    }
}
