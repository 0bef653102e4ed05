#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use swingsim::control::PathKind;
use swingsim::sim::{
    braked_descent, follow_path, grid_sweep, sig9, slope_climb, speed_stats, steady_velocity,
    sweep, SweepAxis, TargetProfile, Trace,
};
use swingsim::sysid::{compare, default_grid, DEFAULT_OMEGA_IN, DEFAULT_OMEGA_OUT};
use swingsim::{evaluate, fit_speed_model, run, Scenario, SpeedModel, SpeedSample};
use thiserror::Error;

use config::{parse_config, ConfigError, RunConfig};

const TRACE_SCHEMA: &str =
    "Trace CSV columns: t,phi,phase,beta,N,F_fwd,f,a,Vp,x,heading,cmd_omega_in \
(cmd_omega_in is empty for open-loop runs).";

#[derive(Debug, Parser)]
#[command(
    name = "swingsim",
    version,
    about = "Simulate, sweep, control and identify a dual-swing-leg anti-bias-wheel robot",
    long_about = "Simulate, sweep, control and identify a dual-swing-leg anti-bias-wheel robot.\n\n\
Every subcommand takes an optional TOML config file; missing keys take the baseline robot's \
values. Output is CSV, written to --output or standard output.\n\n\
Exit status: 0 on success, 2 for config errors, 3 for runtime errors, 4 when --check fails.\n\
SWINGSIM_THREADS caps the worker threads used by sweeps (0 or unset: one per core)."
)]
struct Cli {
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    /// Verify the result against the expected behaviour; exit 4 if it does not hold.
    #[arg(long, global = true)]
    check: bool,
    /// Accepted for harness compatibility; runs are deterministic and ignore it.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Write CSV here instead of standard output.
    #[arg(short, long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single open-loop run at the configured gait.
    #[command(after_help = format!("{TRACE_SCHEMA}\n--check: steady speed within 15% of the quadratic speed model."))]
    Sim { config: Option<PathBuf> },

    /// Steady speed against one swing speed.
    #[command(after_help = "CSV columns: omega_in,omega_out,steady_vp,error\n\
--check: steady speed nondecreasing in omega_in (omega_in axis only).")]
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated swing speeds (rad/s); defaults to the standard grid of the axis.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        config: Option<PathBuf>,
    },

    /// Steady climbing speed on a list of slopes.
    #[command(
        after_help = "CSV columns: alpha_deg,alpha_rad,steady_vp,mean_vp,displacement,climbs,error\n\
--check: the robot climbs on flat ground and stalls on every slope of 4 degrees or more."
    )]
    Slope {
        /// Comma-separated slope angles in degrees.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5")]
        alphas: Vec<f64>,
        config: Option<PathBuf>,
    },

    /// Coast down a slope with the legs frozen, braking about a target speed.
    #[command(after_help = format!("{TRACE_SCHEMA} A brake column (0/1) is appended when braking.\n\
--check: without brake the speed rises strictly; with brake it never exceeds 1.5 x target."))]
    Descend {
        /// Slope length (m).
        #[arg(long)]
        length: Option<f64>,
        /// Brake set-point (m/s).
        #[arg(long)]
        target: Option<f64>,
        /// Slope magnitude in degrees.
        #[arg(long)]
        slope_deg: Option<f64>,
        /// Leave the brake released.
        #[arg(long)]
        no_brake: bool,
        config: Option<PathBuf>,
    },

    /// Closed-loop speed control.
    #[command(after_help = format!("{TRACE_SCHEMA}\n\
--check: mean speed over the last 5 s of each plateau within 5% of its target."))]
    Velctl {
        /// Constant target speed (m/s), used when --steps is absent.
        #[arg(long, default_value_t = 0.5)]
        target: f64,
        /// Comma-separated staircase of target speeds (m/s).
        #[arg(long, value_delimiter = ',')]
        steps: Option<Vec<f64>>,
        /// Time each target level is held (s). A constant target runs for at
        /// least this long.
        #[arg(long, default_value_t = 15.0)]
        hold: f64,
        config: Option<PathBuf>,
    },

    /// Closed-loop path following with the rudder.
    #[command(after_help = format!("{TRACE_SCHEMA} Pose columns px,py,lat_err,gamma are appended.\n\
--check: over the measured lap, 90% of speeds within [0.85, 1.17] x target and the mean within 0.05 m/s."))]
    Follow {
        #[arg(long, value_enum, default_value_t = PathArg::Figure8)]
        path: PathArg,
        /// Target speed (m/s).
        #[arg(long, default_value_t = 0.47)]
        target: f64,
        config: Option<PathBuf>,
    },

    /// Fit the quadratic speed model and compare it with the published ones.
    #[command(
        after_help = "CSV columns: coef,value,stderr, followed by a summary on standard output.\n\
--from-sweep reads CSV files with omega_in,omega_out,steady_vp columns (e.g. sweep output);\n\
without it the default 5 x 4 grid is simulated.\n\
--check: fitted a1 within [0.30, 0.50]."
    )]
    Fit {
        #[arg(long, value_name = "CSV")]
        from_sweep: Vec<PathBuf>,
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Axis {
    #[value(name = "omega_in", alias = "omega-in")]
    OmegaIn,
    #[value(name = "omega_out", alias = "omega-out")]
    OmegaOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PathArg {
    Figure8,
    Circle,
    Line,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Check(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            Ok(parse_config(&text)?)
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SWINGSIM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::Config(format!(
            "SWINGSIM_THREADS must be a non-negative integer, got {raw:?}"
        ))
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(runtime)?;
    }
    Ok(())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            CliError::Runtime(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_trace(trace: &Trace, output: Option<&Path>) -> Result<(), CliError> {
    let mut out = open_output(output)?;
    trace.write_csv(&mut out).map_err(runtime)?;
    out.flush().map_err(runtime)
}

fn csv_writer(output: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(open_output(output)?))
}

fn check(enabled: bool, ok: bool, message: impl FnOnce() -> String) -> Result<(), CliError> {
    if enabled && !ok {
        Err(CliError::Check(message()))
    } else {
        Ok(())
    }
}

fn cmd_sim(cfg: &RunConfig, cli: &Cli) -> Result<(), CliError> {
    let scenario = cfg.scenario();
    let trace = run(&scenario).map_err(runtime)?;
    write_trace(&trace, cli.output.as_deref())?;
    if let Ok(v) = steady_velocity(&trace, &scenario.gait) {
        let predicted = evaluate(
            &SpeedModel::PAPER_SIM,
            scenario.gait.omega_in,
            scenario.gait.omega_out,
        );
        eprintln!("steady speed {v:.4} m/s (model {predicted:.4} m/s)");
        check(cli.check, (v / predicted - 1.0).abs() <= 0.15, || {
            format!("steady speed {v:.4} m/s is not within 15% of {predicted:.4} m/s")
        })
    } else {
        check(cli.check, false, || {
            "run too short for a steady speed (need six gait cycles)".to_string()
        })
    }
}

fn cmd_sweep(
    cfg: &RunConfig,
    cli: &Cli,
    axis: Axis,
    values: Option<&[f64]>,
) -> Result<(), CliError> {
    let (axis, defaults): (SweepAxis, &[f64]) = match axis {
        Axis::OmegaIn => (SweepAxis::OmegaIn, &DEFAULT_OMEGA_IN),
        Axis::OmegaOut => (SweepAxis::OmegaOut, &DEFAULT_OMEGA_OUT),
    };
    let values = values.unwrap_or(defaults);
    let base = cfg.scenario();
    let rows = sweep(&base, axis, values);
    let mut w = csv_writer(cli.output.as_deref())?;
    w.write_record(["omega_in", "omega_out", "steady_vp", "error"])
        .map_err(runtime)?;
    for row in &rows {
        let (wi, wo) = match axis {
            SweepAxis::OmegaIn => (row.value, base.gait.omega_out),
            SweepAxis::OmegaOut => (base.gait.omega_in, row.value),
        };
        let (v, err) = match &row.steady_velocity {
            Ok(v) => (sig9(*v), String::new()),
            Err(e) => (String::new(), e.to_string()),
        };
        w.write_record([sig9(wi), sig9(wo), v, err])
            .map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    let failed = rows.iter().filter(|r| r.steady_velocity.is_err()).count();
    if failed > 0 {
        eprintln!("{failed} of {} sweep points failed", rows.len());
    }
    let speeds: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.steady_velocity.clone().ok())
        .collect();
    check(
        cli.check,
        failed == 0 && (axis == SweepAxis::OmegaOut || speeds.windows(2).all(|p| p[1] >= p[0])),
        || "steady speed is not nondecreasing over the sweep".to_string(),
    )
}

fn cmd_slope(cfg: &RunConfig, cli: &Cli, alphas_deg: &[f64]) -> Result<(), CliError> {
    let alphas: Vec<f64> = alphas_deg.iter().map(|d| d.to_radians()).collect();
    let rows = slope_climb(&cfg.scenario(), &alphas);
    let mut w = csv_writer(cli.output.as_deref())?;
    w.write_record([
        "alpha_deg",
        "alpha_rad",
        "steady_vp",
        "mean_vp",
        "displacement",
        "climbs",
        "error",
    ])
    .map_err(runtime)?;
    let mut ok = true;
    for (deg, row) in alphas_deg.iter().zip(&rows) {
        let record = match row {
            Ok(r) => {
                let expected = if *deg >= 4.0 {
                    !r.climbs()
                } else {
                    *deg > 0.0 || r.climbs()
                };
                ok &= expected;
                [
                    sig9(*deg),
                    sig9(r.alpha),
                    sig9(r.steady_velocity),
                    sig9(r.mean_velocity),
                    sig9(r.displacement),
                    (r.climbs() as u8).to_string(),
                    String::new(),
                ]
            }
            Err(e) => {
                ok = false;
                let rad = sig9(deg.to_radians());
                [
                    sig9(*deg),
                    rad,
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.to_string(),
                ]
            }
        };
        w.write_record(&record).map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    check(cli.check, ok, || {
        "expected a climb on flat ground and a stall at 4 degrees and above".to_string()
    })
}

fn cmd_descend(
    cfg: &RunConfig,
    cli: &Cli,
    length: Option<f64>,
    target: Option<f64>,
    slope_deg: Option<f64>,
    no_brake: bool,
) -> Result<(), CliError> {
    let mut section = cfg.descent;
    if let Some(l) = length {
        section.length_m = l;
    }
    if let Some(t) = target {
        section.target = t;
    }
    if let Some(d) = slope_deg {
        section.slope = d.to_radians();
    }
    let setup = section.setup(!no_brake);
    setup
        .validate()
        .map_err(|e| CliError::Config(e.in_section("descent").to_string()))?;
    let trace = braked_descent(&cfg.scenario(), &setup).map_err(runtime)?;
    write_trace(&trace, cli.output.as_deref())?;
    let peak = trace.rows.iter().map(|r| r.vp).fold(0.0, f64::max);
    let end = trace.rows.last().map_or(0.0, |r| r.t);
    eprintln!(
        "reached {:.2} m after {end:.2} s, peak speed {peak:.4} m/s",
        section.length_m
    );
    match setup.target {
        None => check(
            cli.check,
            trace.rows.windows(2).all(|w| w[1].vp > w[0].vp),
            || "unbraked speed is not strictly increasing".to_string(),
        ),
        Some(t) => check(cli.check, peak <= 1.5 * t, || {
            format!("peak speed {peak:.4} m/s exceeds 1.5 x {t} m/s")
        }),
    }
}

fn cmd_velctl(
    cfg: &RunConfig,
    cli: &Cli,
    target: f64,
    steps: Option<&[f64]>,
    hold: f64,
) -> Result<(), CliError> {
    if !(hold > 0.0) {
        return Err(CliError::Config("--hold must be > 0".to_string()));
    }
    let levels: Vec<f64> = steps.map_or_else(|| vec![target], <[f64]>::to_vec);
    if levels.is_empty() || levels.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(CliError::Config("target speeds must be > 0".to_string()));
    }
    let (profile, duration) = match steps {
        Some(_) => (
            TargetProfile::staircase(&levels, hold),
            hold * levels.len() as f64,
        ),
        None => (
            TargetProfile::constant(target),
            cfg.scenario.duration_s.max(hold),
        ),
    };
    let plateau = if steps.is_some() { hold } else { duration };
    let scenario = Scenario {
        controller: Some(cfg.controller.clone()),
        target: profile,
        duration_s: duration,
        ..cfg.scenario()
    };
    let trace = run(&scenario).map_err(runtime)?;
    write_trace(&trace, cli.output.as_deref())?;
    let mut ok = true;
    for (k, &level) in levels.iter().enumerate() {
        let end = (k + 1) as f64 * plateau;
        let speeds: Vec<f64> = trace
            .rows
            .iter()
            .filter(|r| r.t > end - 5.0f64.min(plateau / 2.0) && r.t <= end + 1e-9)
            .map(|r| r.vp)
            .collect();
        let mean = speed_stats(&speeds, 0.0, f64::INFINITY).map_or(f64::NAN, |s| s.mean);
        eprintln!("target {level:.3} m/s: settled mean {mean:.4} m/s");
        ok &= (mean / level - 1.0).abs() < 0.05;
    }
    check(cli.check, ok, || {
        "a plateau mean is off its target by 5% or more".to_string()
    })
}

fn cmd_follow(cfg: &RunConfig, cli: &Cli, path: PathArg, target: f64) -> Result<(), CliError> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(CliError::Config("--target must be > 0".to_string()));
    }
    let mut path_def = cfg.path;
    path_def.kind = match path {
        PathArg::Figure8 => PathKind::FigureEight,
        PathArg::Circle => PathKind::Circle,
        PathArg::Line => PathKind::Line,
    };
    let closed = path_def.lap_span().is_some();
    let scenario = Scenario {
        controller: Some(cfg.controller.clone()),
        path: Some(path_def),
        target: TargetProfile::constant(target),
        duration_s: if closed {
            cfg.follow.max_time_s
        } else {
            cfg.scenario.duration_s
        },
        ..cfg.scenario()
    };
    let (trace, speeds) = if closed {
        let report = follow_path(&scenario, cfg.follow.settle_s).map_err(runtime)?;
        let speeds = report.lap_speeds();
        eprintln!(
            "lap {:.2}..{:.2} s, max lateral error {:.4} m",
            report.lap_start, report.lap_end, report.max_lateral_error
        );
        (report.trace, speeds)
    } else {
        let trace = run(&scenario).map_err(runtime)?;
        let speeds = trace
            .rows
            .iter()
            .filter(|r| r.t > cfg.follow.settle_s)
            .map(|r| r.vp)
            .collect();
        (trace, speeds)
    };
    write_trace(&trace, cli.output.as_deref())?;
    let (lo, hi) = (0.85 * target, 1.17 * target);
    match speed_stats(&speeds, lo, hi) {
        Some(s) => {
            eprintln!(
                "speed mean {:.4} m/s, {:.1}% of samples in [{lo:.3}, {hi:.3}] m/s",
                s.mean,
                s.in_band * 100.0
            );
            check(
                cli.check,
                s.in_band >= 0.9 && (s.mean - target).abs() <= 0.05,
                || {
                    format!(
                        "speed band {:.1}% / mean {:.4} m/s out of tolerance",
                        s.in_band * 100.0,
                        s.mean
                    )
                },
            )
        }
        None => check(cli.check, false, || {
            "no samples after the settle time".to_string()
        }),
    }
}

fn read_samples(paths: &[PathBuf]) -> Result<Vec<SpeedSample>, CliError> {
    let mut samples = Vec::new();
    for path in paths {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let headers = reader.headers().map_err(runtime)?.clone();
        let column = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| {
                CliError::Config(format!("{} has no `{name}` column", path.display()))
            })
        };
        let (ci, co, cv) = (
            column("omega_in")?,
            column("omega_out")?,
            column("steady_vp")?,
        );
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(runtime)?;
            let field = |i: usize| record.get(i).unwrap_or("").trim();
            if field(cv).is_empty() {
                continue;
            }
            let parse = |i: usize| {
                field(i).parse::<f64>().map_err(|_| {
                    CliError::Config(format!(
                        "{}: row {}: bad number {:?}",
                        path.display(),
                        line + 2,
                        field(i)
                    ))
                })
            };
            samples.push(SpeedSample::new(parse(ci)?, parse(co)?, parse(cv)?));
        }
    }
    Ok(samples)
}

fn cmd_fit(cfg: &RunConfig, cli: &Cli, from: &[PathBuf]) -> Result<(), CliError> {
    let samples = if from.is_empty() {
        let grid = default_grid();
        grid.iter()
            .zip(grid_sweep(&cfg.scenario(), &grid))
            .map(|(&(wi, wo), v)| v.map(|v| SpeedSample::new(wi, wo, v)).map_err(runtime))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        read_samples(from)?
    };
    let report = fit_speed_model(&samples).map_err(runtime)?;
    let mut w = csv_writer(cli.output.as_deref())?;
    w.write_record(["coef", "value", "stderr"])
        .map_err(runtime)?;
    for ((name, value), err) in SpeedModel::NAMES
        .iter()
        .zip(report.model.coefficients())
        .zip(report.stderr)
    {
        w.write_record([name.to_string(), sig9(value), sig9(err)])
            .map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    drop(w);

    let grid = default_grid();
    let vs_sim = compare(&report.model, &SpeedModel::PAPER_SIM, &grid);
    let vs_exp = compare(&report.model, &SpeedModel::PAPER_EXP, &grid);
    let summary = [
        format!("samples            {}", report.samples),
        format!("residual rms       {:.5} m/s", report.residual_rms),
        format!(
            "v(1.17, 0.975)     {:.4} m/s (published sim {:.4}, exp {:.4})",
            evaluate(&report.model, 1.17, 0.975),
            evaluate(&SpeedModel::PAPER_SIM, 1.17, 0.975),
            evaluate(&SpeedModel::PAPER_EXP, 1.17, 0.975)
        ),
        format!(
            "gap to sim model   max {:.4} rms {:.4} m/s",
            vs_sim.max_abs, vs_sim.rms
        ),
        format!(
            "gap to exp model   max {:.4} rms {:.4} m/s",
            vs_exp.max_abs, vs_exp.rms
        ),
    ];
    // keep the CSV clean when it goes to standard output
    let prefix = if cli.output.is_some() { "" } else { "# " };
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{prefix}speed model fit").map_err(runtime)?;
    for line in summary {
        writeln!(stdout, "{prefix}{line}").map_err(runtime)?;
    }
    let a1 = report.model.a1;
    check(cli.check, (0.30..=0.50).contains(&a1), || {
        format!("fitted a1 = {a1:.4} is outside [0.30, 0.50]")
    })
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let path = match &cli.command {
        Command::Sim { config }
        | Command::Sweep { config, .. }
        | Command::Slope { config, .. }
        | Command::Descend { config, .. }
        | Command::Velctl { config, .. }
        | Command::Follow { config, .. }
        | Command::Fit { config, .. } => config.as_deref(),
    };
    let cfg = load_config(path)?;
    if cli.dump_config {
        let mut out = open_output(cli.output.as_deref())?;
        out.write_all(cfg.dump().as_bytes()).map_err(runtime)?;
        return out.flush().map_err(runtime);
    }
    configure_threads()?;
    match &cli.command {
        Command::Sim { .. } => cmd_sim(&cfg, cli),
        Command::Sweep { axis, values, .. } => cmd_sweep(&cfg, cli, *axis, values.as_deref()),
        Command::Slope { alphas, .. } => cmd_slope(&cfg, cli, alphas),
        Command::Descend {
            length,
            target,
            slope_deg,
            no_brake,
            ..
        } => cmd_descend(&cfg, cli, *length, *target, *slope_deg, *no_brake),
        Command::Velctl {
            target,
            steps,
            hold,
            ..
        } => cmd_velctl(&cfg, cli, *target, steps.as_deref(), *hold),
        Command::Follow { path, target, .. } => cmd_follow(&cfg, cli, *path, *target),
        Command::Fit { from_sweep, .. } => cmd_fit(&cfg, cli, from_sweep),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
