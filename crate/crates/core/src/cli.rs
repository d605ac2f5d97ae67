//! `ramptrack` command line.
//!
//! Exit codes: 0 success or certified, 1 certification or check failed (or a
//! simulation fault), 2 usage or configuration error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineParams};
use crate::cert::{self, certify, design_optimal, kappa_max};
use crate::io;
use crate::plot::{LineChart, Series};
use crate::sector::{make_quadratic, CostOracle, OptimumTrajectory, SectorBounds};
use crate::toa::{run_comparison, ComparisonMethod, MethodRun, Scenario};
use crate::tracker::{self, DelayedGradientTime, Engine, RunOptions, TrackerParams};
use crate::trajectory::{Method, RunResult, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const CONFIG_ECHO: &str = "config.json";

#[derive(Debug, Parser)]
#[command(name = "ramptrack", version, about = "Design, certify and simulate a ramp-tracking gradient method")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate-optimal certified parameters for given sector bounds.
    Design(DesignArgs),
    /// Circle-criterion certificate for explicit parameters.
    Certify(CertifyArgs),
    /// Run one method on a configured oracle.
    Simulate(SimulateArgs),
    /// Moving-source TOA localization comparison.
    Toa(ToaArgs),
    /// Tabulate rates, kappa bounds or SPR margins.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.1)]
    pub m: f64,
    #[arg(long = "L", allow_negative_numbers = true, default_value_t = 6.0)]
    pub l: f64,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub bounds: BoundsArgs,
    /// Print JSON instead of the summary lines.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON result to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: f64,
    #[command(flatten)]
    pub bounds: BoundsArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write `error.svg`.
    #[arg(long)]
    pub svg: bool,
    /// Exit 1 unless the final error is at most this value.
    #[arg(long)]
    pub check_final_error: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ToaArgs {
    /// JSON scenario; missing fields take the experiment defaults.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, num_args = 2, allow_negative_numbers = true, value_names = ["A1", "A2"])]
    pub velocity: Option<Vec<f64>>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, num_args = 2, allow_negative_numbers = true, value_names = ["X1", "X2"])]
    pub x_init: Option<Vec<f64>>,
    /// Comma separated subset of tracker,gd,heavy_ball,tmm.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub out: PathBuf,
    /// Exit 1 unless the tracker beats gd and tmm by 10x on the last third.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Spectral radius against lambda in [m, L].
    Rate,
    /// Largest certifiable kappa against rho.
    Kappa,
    /// Re H0 on the upper unit semicircle.
    Spr,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: SweepKind,
    #[command(flatten)]
    pub bounds: BoundsArgs,
    /// Defaults to the rate-optimal design.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1001)]
    pub points: usize,
    #[arg(long, default_value_t = 0.01)]
    pub rho_min: f64,
    #[arg(long, default_value_t = 0.99)]
    pub rho_max: f64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Oracle selection for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleConfig {
    Quadratic {
        eigenvalues: Vec<f64>,
        bounds: SectorBounds,
        x_star0: Vec<f64>,
        velocity: Vec<f64>,
    },
    Toa {
        #[serde(default)]
        scenario: Scenario,
    },
}

/// Either a method name with coefficients derived from the bounds, or
/// explicit coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodSpec {
    Named(ComparisonMethod),
    Explicit(Method),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub oracle: OracleConfig,
    pub method: MethodSpec,
    pub horizon: usize,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub x1: Option<Vec<f64>>,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub delayed_gradient: DelayedGradientTime,
}

/// Resolved TOA run, echoed beside its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToaConfig {
    pub scenario: Scenario,
    pub methods: Vec<ComparisonMethod>,
}

/// `--scenario` accepts a bare scenario or a previous run's echo.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum ScenarioFile {
    Echo(ToaConfig),
    Plain(Scenario),
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Failed(String),
}

type CmdResult = std::result::Result<i32, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn io_failed(e: impl std::fmt::Display) -> Failure {
    Failure::Failed(e.to_string())
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Design(a) => cmd_design(&a),
        Command::Certify(a) => cmd_certify(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Toa(a) => cmd_toa(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Failed(msg)) => {
            eprintln!("error: {msg}");
            EXIT_FAILED
        }
    }
}

fn bounds_of(b: &BoundsArgs) -> std::result::Result<SectorBounds, Failure> {
    SectorBounds::new(b.m, b.l).map_err(usage)
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("plain data serializes") + "\n"
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> std::result::Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failed(format!("{}: {e}", path.display())))
}

fn cmd_design(a: &DesignArgs) -> CmdResult {
    let bounds = bounds_of(&a.bounds)?;
    let d = design_optimal(&bounds).map_err(usage)?;
    let json = to_json(&d);
    if a.json {
        print!("{json}");
    } else {
        println!("kappa {}", bounds.kappa());
        println!("alpha {:.6}", d.alpha_star);
        println!("gamma {:.6}", d.gamma_star);
        println!("rho {:.6}", d.rho_star);
    }
    if let Some(path) = &a.out {
        write_file(path, json)?;
    }
    Ok(EXIT_OK)
}

fn cmd_certify(a: &CertifyArgs) -> CmdResult {
    let bounds = bounds_of(&a.bounds)?;
    if !(a.alpha.is_finite() && a.gamma.is_finite()) {
        return Err(usage("alpha and gamma must be finite"));
    }
    let c = certify(&TrackerParams::raw(a.alpha, a.gamma), &bounds);
    print!("{}", to_json(&c));
    if !c.is_consistent() {
        eprintln!("warning: certified parameters report a rate >= 1");
    }
    Ok(if c.globally_convergent { EXIT_OK } else { EXIT_FAILED })
}

/// Config with method names replaced by explicit coefficients.
pub fn resolve_config(cfg: &SimulateConfig) -> crate::Result<SimulateConfig> {
    let bounds = match &cfg.oracle {
        OracleConfig::Quadratic { bounds, .. } => *bounds,
        OracleConfig::Toa { scenario } => scenario.declared_bounds,
    };
    let method = match cfg.method {
        MethodSpec::Explicit(m) => m,
        MethodSpec::Named(n) => match n {
            ComparisonMethod::Tracker => Method::Tracker(design_optimal(&bounds)?.params()),
            ComparisonMethod::GradientDescent => Method::Baseline(BaselineParams::gradient_descent(&bounds)),
            ComparisonMethod::HeavyBall => Method::Baseline(BaselineParams::polyak(&bounds)),
            ComparisonMethod::TripleMomentum => Method::Baseline(BaselineParams::triple_momentum(&bounds)),
        },
    };
    match method {
        Method::Tracker(p) => {
            TrackerParams::new(p.alpha, p.gamma)?;
        }
        Method::Baseline(b) => b.validate()?,
    }
    let x0 = match (&cfg.x0, &cfg.oracle) {
        (Some(x), _) => x.clone(),
        (None, OracleConfig::Toa { scenario }) => scenario.x_init.clone(),
        (None, OracleConfig::Quadratic { .. }) => {
            return Err(crate::Error::invalid("quadratic oracle needs x0"));
        }
    };
    Ok(SimulateConfig {
        method: MethodSpec::Explicit(method),
        x0: Some(x0),
        ..cfg.clone()
    })
}

fn build_oracle(cfg: &OracleConfig) -> crate::Result<Box<dyn CostOracle>> {
    Ok(match cfg {
        OracleConfig::Quadratic {
            eigenvalues,
            bounds,
            x_star0,
            velocity,
        } => {
            let path = OptimumTrajectory::new(x_star0.clone(), velocity.clone())?;
            Box::new(make_quadratic(eigenvalues, None, path, *bounds)?)
        }
        OracleConfig::Toa { scenario } => Box::new(scenario.oracle()?),
    })
}

/// Runs a resolved config. Errors are configuration problems; faults during
/// the run come back inside the `RunResult`.
pub fn simulate(cfg: &SimulateConfig) -> crate::Result<RunResult> {
    let cfg = resolve_config(cfg)?;
    let oracle = build_oracle(&cfg.oracle)?;
    let n = oracle.dimension();
    let x0 = cfg.x0.clone().expect("resolved");
    crate::error::check_dim(n, x0.len())?;
    if let Some(x1) = &cfg.x1 {
        crate::error::check_dim(n, x1.len())?;
    }
    if cfg.horizon < 2 {
        return Err(crate::Error::invalid("horizon must be >= 2"));
    }
    let x0 = DVector::from_vec(x0);
    let MethodSpec::Explicit(method) = cfg.method else {
        unreachable!("resolved config carries explicit coefficients")
    };
    Ok(match method {
        Method::Tracker(p) => {
            if cfg.engine == Engine::Lure && cfg.delayed_gradient == DelayedGradientTime::Current {
                return Err(crate::Error::invalid("the lure engine supports only the lagged delayed gradient"));
            }
            let options = RunOptions {
                engine: cfg.engine,
                delayed_gradient: cfg.delayed_gradient,
            };
            tracker::run(oracle.as_ref(), &p, x0, cfg.x1.clone().map(DVector::from_vec), cfg.horizon, options)
        }
        Method::Baseline(b) => {
            if cfg.x1.is_some() {
                return Err(crate::Error::invalid("x1 applies only to the tracker"));
            }
            run_baseline(oracle.as_ref(), &b, x0, cfg.horizon)
        }
    })
}

fn error_chart(title: &str, trajs: &[(&str, &Trajectory)]) -> LineChart {
    trajs.iter().fold(LineChart::new(title, "t", "|x(t) - x*(t)|", true), |c, (name, tr)| {
        c.with_series(Series::new(
            *name,
            tr.errors.iter().enumerate().map(|(t, e)| (t as f64, *e)).collect(),
        ))
    })
}

fn coordinate_chart(title: &str, coord: usize, trajs: &[(&str, &Trajectory)]) -> LineChart {
    let label = format!("x_{}", coord + 1);
    let mut chart = LineChart::new(title, "t", &label, false);
    if let Some((_, first)) = trajs.first() {
        chart = chart.with_series(Series::new(
            "optimum",
            first.optima.iter().enumerate().map(|(t, x)| (t as f64, x[coord])).collect(),
        ));
    }
    trajs.iter().fold(chart, |c, (name, tr)| {
        c.with_series(Series::new(
            *name,
            tr.iterates.iter().enumerate().map(|(t, x)| (t as f64, x[coord])).collect(),
        ))
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> std::result::Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> std::result::Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failed(format!("{}: {e}", dir.display())))
}

fn write_trajectory(path: &Path, tr: &Trajectory) -> std::result::Result<(), Failure> {
    let mut buf = Vec::new();
    io::write_trajectory_csv(&mut buf, tr).map_err(io_failed)?;
    write_file(path, buf)
}

fn cmd_simulate(a: &SimulateArgs) -> CmdResult {
    let cfg: SimulateConfig = read_json(&a.config)?;
    let resolved = resolve_config(&cfg).map_err(usage)?;
    let outcome = simulate(&resolved).map_err(usage)?;
    ensure_dir(&a.out)?;
    write_file(&a.out.join(CONFIG_ECHO), to_json(&resolved))?;
    let (traj, fault) = match outcome {
        Ok(t) => (t, None),
        Err(i) => (*i.partial, Some(i.source)),
    };
    write_trajectory(&a.out.join("trajectory.csv"), &traj)?;
    if a.svg {
        let chart = error_chart("tracking error", &[(traj.method.name(), &traj)]);
        write_file(&a.out.join("error.svg"), chart.render())?;
    }
    if let Some(e) = fault {
        return Err(Failure::Failed(format!("simulation fault: {e}")));
    }
    let final_error = traj.final_error().unwrap_or(f64::NAN);
    println!("method {}", traj.method.name());
    println!("iterates {}", traj.len());
    println!("final_error {}", io::fmt_f64(final_error));
    if let Some(tol) = a.check_final_error {
        if !(final_error <= tol) {
            eprintln!("check failed: final error {final_error:e} > {tol:e}");
            return Ok(EXIT_FAILED);
        }
    }
    Ok(EXIT_OK)
}

fn parse_methods(names: &[String]) -> std::result::Result<Vec<ComparisonMethod>, Failure> {
    names
        .iter()
        .map(|n| serde_json::from_value(serde_json::Value::String(n.trim().to_string())).map_err(|_| usage(format!("unknown method {n:?}"))))
        .collect()
}

/// Outcome of the TOA comparison check on the window `[2T/3, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToaCheck {
    pub tracker_final: f64,
    pub tracker_mean: f64,
    /// Minimum error of each competitor over the window.
    pub competitors: Vec<(ComparisonMethod, f64)>,
    pub passed: bool,
}

pub fn toa_check(runs: &[MethodRun], horizon: usize) -> Option<ToaCheck> {
    let from = horizon * 2 / 3;
    let traj = |m: ComparisonMethod| runs.iter().find(|r| r.method == m).and_then(|r| r.outcome.as_ref().ok());
    let tracker = traj(ComparisonMethod::Tracker)?;
    let tracker_final = tracker.final_error()?;
    let tracker_mean = tracker.mean_error(from, horizon)?;
    let mut passed = tracker_final <= 1e-3;
    let mut competitors = Vec::new();
    for m in [ComparisonMethod::GradientDescent, ComparisonMethod::TripleMomentum] {
        let low = traj(m).and_then(|t| t.min_error(from, horizon)).unwrap_or(f64::NAN);
        passed &= low >= 10.0 * tracker_mean;
        competitors.push((m, low));
    }
    Some(ToaCheck {
        tracker_final,
        tracker_mean,
        competitors,
        passed,
    })
}

fn cmd_toa(a: &ToaArgs) -> CmdResult {
    let (mut scenario, echoed_methods) = match &a.scenario {
        Some(p) => match read_json(p)? {
            ScenarioFile::Echo(c) => (c.scenario, Some(c.methods)),
            ScenarioFile::Plain(s) => (s, None),
        },
        None => (Scenario::default(), None),
    };
    if let Some(v) = &a.velocity {
        scenario.velocity = v.clone();
    }
    if let Some(s) = a.noise {
        scenario.noise_std = s;
    }
    if let Some(s) = a.seed {
        scenario.seed = s;
    }
    if let Some(h) = a.horizon {
        scenario.horizon = h;
    }
    if let Some(x) = &a.x_init {
        scenario.x_init = x.clone();
    }
    let methods = match (&a.methods, echoed_methods) {
        (Some(names), _) => parse_methods(names)?,
        (None, Some(m)) => m,
        (None, None) => ComparisonMethod::DEFAULT_SET.to_vec(),
    };
    scenario.validate().map_err(usage)?;
    if scenario.horizon < 2 {
        return Err(usage("horizon must be >= 2"));
    }
    let runs = run_comparison(&scenario, &methods, scenario.horizon, &scenario.x_init).map_err(usage)?;

    ensure_dir(&a.out)?;
    let echo = ToaConfig {
        scenario: scenario.clone(),
        methods: methods.clone(),
    };
    write_file(&a.out.join(CONFIG_ECHO), to_json(&echo))?;
    let mut faults = Vec::new();
    let trajs: Vec<(&str, &Trajectory)> = runs
        .iter()
        .map(|r| {
            let tr = match &r.outcome {
                Ok(t) => t,
                Err(i) => {
                    faults.push(format!("{}: {}", r.method.name(), i));
                    i.partial.as_ref()
                }
            };
            (r.method.name(), tr)
        })
        .collect();
    for (name, tr) in &trajs {
        write_trajectory(&a.out.join(format!("toa_{name}.csv")), tr)?;
        let final_err = tr.final_error().unwrap_or(f64::NAN);
        println!("{name} final_error {}", io::fmt_f64(final_err));
    }
    let mut buf = Vec::new();
    io::write_error_traces_csv(&mut buf, &trajs).map_err(io_failed)?;
    write_file(&a.out.join("toa_errors.csv"), buf)?;
    for coord in 0..scenario.x_star0.len().min(2) {
        let chart = coordinate_chart(&format!("coordinate x_{}", coord + 1), coord, &trajs);
        write_file(&a.out.join(format!("toa_x{}.svg", coord + 1)), chart.render())?;
    }
    write_file(&a.out.join("toa_error.svg"), error_chart("tracking error", &trajs).render())?;

    if !faults.is_empty() {
        return Err(Failure::Failed(format!("simulation fault: {}", faults.join("; "))));
    }
    if a.check {
        let Some(check) = toa_check(&runs, scenario.horizon) else {
            return Err(usage("--check needs the tracker among the methods"));
        };
        println!("tracker window_mean {}", io::fmt_f64(check.tracker_mean));
        for (m, low) in &check.competitors {
            println!("{} window_min {}", m.name(), io::fmt_f64(*low));
        }
        println!("check {}", if check.passed { "passed" } else { "failed" });
        if !check.passed {
            return Ok(EXIT_FAILED);
        }
    }
    Ok(EXIT_OK)
}

/// Evenly spaced grid of `points` values over `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> crate::Result<Vec<f64>> {
    if points < 2 || !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(crate::Error::invalid(format!(
            "malformed grid: {points} points on [{lo}, {hi}]"
        )));
    }
    let last = (points - 1) as f64;
    Ok((0..points).map(|k| lo + (hi - lo) * k as f64 / last).collect())
}

/// Sweep table: header and rows.
pub fn sweep_table(
    kind: SweepKind,
    bounds: &SectorBounds,
    params: Option<TrackerParams>,
    points: usize,
    rho_range: (f64, f64),
) -> crate::Result<(Vec<&'static str>, Vec<Vec<f64>>)> {
    let params = match params {
        Some(p) => p,
        None => design_optimal(bounds)?.params(),
    };
    Ok(match kind {
        SweepKind::Rate => {
            let grid = linear_grid(bounds.m(), bounds.l(), points)?;
            let rows = grid
                .into_iter()
                .map(|lambda| vec![lambda, cert::spectral_radius(&cert::char_poly(&params, lambda))])
                .collect();
            (vec!["lambda", "spectral_radius"], rows)
        }
        SweepKind::Kappa => {
            let (lo, hi) = rho_range;
            if !(lo > 0.0 && hi < 1.0) {
                return Err(crate::Error::invalid("rho grid must lie inside (0, 1)"));
            }
            let rows = linear_grid(lo, hi, points)?
                .into_iter()
                .map(|rho| Ok(vec![rho, kappa_max(rho)?]))
                .collect::<crate::Result<_>>()?;
            (vec!["rho", "kappa_max"], rows)
        }
        SweepKind::Spr => {
            let grid = linear_grid(0.0, std::f64::consts::PI, points)?;
            let rows = grid
                .into_iter()
                .map(|omega| {
                    let re = cert::h0_eval(&params, bounds, omega).map_or(f64::NAN, |h| h.re);
                    vec![omega, re]
                })
                .collect();
            (vec!["omega", "re_h0"], rows)
        }
    })
}

fn cmd_sweep(a: &SweepArgs) -> CmdResult {
    let bounds = bounds_of(&a.bounds)?;
    let params = match (a.alpha, a.gamma) {
        (Some(alpha), Some(gamma)) => Some(TrackerParams::raw(alpha, gamma)),
        (None, None) => None,
        _ => return Err(usage("give both --alpha and --gamma or neither")),
    };
    let (header, rows) = sweep_table(a.kind, &bounds, params, a.points, (a.rho_min, a.rho_max)).map_err(usage)?;
    let mut buf = Vec::new();
    io::write_table_csv(&mut buf, &header, &rows).map_err(io_failed)?;
    match &a.out {
        Some(path) => write_file(path, buf)?,
        None => print!("{}", String::from_utf8(buf).expect("csv output is utf-8")),
    }
    Ok(EXIT_OK)
}
