use std::io::{self, Write};

use crate::gait::Phase;

/// Extra columns recorded while following a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSample {
    pub px: f64,
    pub py: f64,
    pub lateral_error: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub phi: f64,
    pub phase: Phase,
    pub beta: f64,
    pub normal: f64,
    pub thrust: f64,
    pub resistance: f64,
    pub accel: f64,
    pub vp: f64,
    pub x: f64,
    pub heading: f64,
    pub cmd_omega_in: Option<f64>,
    pub pose: Option<PoseSample>,
    pub brake: Option<bool>,
}

/// Time-indexed record of a run, one row every `stride` integration steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub dt: f64,
    pub stride: usize,
    pub rows: Vec<TraceRow>,
}

pub const TRACE_COLUMNS: [&str; 12] = [
    "t",
    "phi",
    "phase",
    "beta",
    "N",
    "F_fwd",
    "f",
    "a",
    "Vp",
    "x",
    "heading",
    "cmd_omega_in",
];
pub const POSE_COLUMNS: [&str; 4] = ["px", "py", "lat_err", "gamma"];
pub const BRAKE_COLUMN: &str = "brake";

/// Format with nine significant digits.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-5..=14).contains(&exponent) {
        let decimals = (8 - exponent).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Rounding may carry into a new leading digit (9.9999999996 -> 10.00000000).
        if decimals > 0 && significant_digits(&s) > 9 {
            return format!("{x:.prec$}", prec = decimals - 1);
        }
        s
    } else {
        format!("{x:.8e}")
    }
}

fn significant_digits(s: &str) -> usize {
    let body = s.trim_start_matches('-');
    let digits: String = body.chars().filter(|c| c.is_ascii_digit()).collect();
    digits.trim_start_matches('0').len()
}

impl Trace {
    pub fn new(dt: f64, stride: usize) -> Self {
        Self {
            dt,
            stride,
            rows: Vec::new(),
        }
    }

    pub fn end_time(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t)
    }

    pub fn has_command(&self) -> bool {
        self.rows.iter().any(|r| r.cmd_omega_in.is_some())
    }

    pub fn has_pose(&self) -> bool {
        self.rows.first().is_some_and(|r| r.pose.is_some())
    }

    pub fn has_brake(&self) -> bool {
        self.rows.first().is_some_and(|r| r.brake.is_some())
    }

    pub fn header(&self) -> Vec<&'static str> {
        let mut cols: Vec<&'static str> = TRACE_COLUMNS.to_vec();
        if self.has_pose() {
            cols.extend(POSE_COLUMNS);
        }
        if self.has_brake() {
            cols.push(BRAKE_COLUMN);
        }
        cols
    }

    /// Write the trace as CSV with a header row and `\n` line endings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let pose = self.has_pose();
        let brake = self.has_brake();
        writeln!(out, "{}", self.header().join(","))?;
        for r in &self.rows {
            let mut fields = vec![
                sig9(r.t),
                sig9(r.phi),
                r.phase.as_str().to_string(),
                sig9(r.beta),
                sig9(r.normal),
                sig9(r.thrust),
                sig9(r.resistance),
                sig9(r.accel),
                sig9(r.vp),
                sig9(r.x),
                sig9(r.heading),
                r.cmd_omega_in.map(sig9).unwrap_or_default(),
            ];
            if pose {
                let p = r.pose.unwrap_or(PoseSample {
                    px: f64::NAN,
                    py: f64::NAN,
                    lateral_error: f64::NAN,
                    gamma: f64::NAN,
                });
                fields.extend([sig9(p.px), sig9(p.py), sig9(p.lateral_error), sig9(p.gamma)]);
            }
            if brake {
                fields.push(if r.brake == Some(true) { "1" } else { "0" }.to_string());
            }
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}
