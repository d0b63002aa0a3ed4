//! The `mprk` command line: integrations, dense evaluations, convergence
//! studies and the positivity demonstration, written as CSV (and optionally SVG).
//!
//! Exit codes: 0 on success, 2 on usage errors, 3 on numerical or I/O failures.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{convergence_study, figure1_experiment, Curve, StudyConfig};
use crate::dense::DenseFormula;
use crate::error::{Error, Result};
use crate::pds::{builtin, load_matrix_file, mass, PdSystem, BUILTIN_NAMES};
use crate::plot::{emit_svg, Series};
use crate::schemes::{integrate, Scheme};

#[derive(Parser, Debug)]
#[command(name = "mprk", version, about = "Positive, conservative MPRK integrators with dense output")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a problem and write the trajectory.
    Integrate(IntegrateArgs),
    /// Integrate and evaluate a dense-output formula inside every step.
    Dense(DenseArgs),
    /// Step-halving convergence study.
    Convergence(ConvergenceArgs),
    /// MPRK43(1, 0.5) with dt = 2 on the linear test: nodal values and both quadratic dense outputs.
    Figure1(OutputArgs),
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output path prefix; `<prefix>.csv` and `<prefix>.svg` are written.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG plot.
    #[arg(long)]
    plot: bool,
}

#[derive(Args, Debug)]
struct ProblemArgs {
    /// Built-in problem name (linear-test, nonlinear-test) or path to a matrix file.
    #[arg(long, default_value = "linear-test")]
    problem: String,
    /// Scheme selector: mpe, mprk22:<alpha>, mprk43:<alpha>,<beta>, mprk4.
    #[arg(long)]
    scheme: String,
}

#[derive(Args, Debug)]
struct IntegrateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    dt: f64,
    #[arg(long = "t-end")]
    t_end: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct DenseArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Dense formula: do1, do2, do2-explicit, do3.
    #[arg(long)]
    dense: String,
    #[arg(long)]
    dt: f64,
    #[arg(long = "t-end")]
    t_end: f64,
    /// Comma-separated theta values in [0, 1].
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    theta: Vec<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Dense formula to measure instead of the nodal error at t_end.
    #[arg(long)]
    dense: Option<String>,
    #[arg(long, default_value_t = 0.125)]
    dt0: f64,
    #[arg(long, default_value_t = 6)]
    levels: usize,
    #[arg(long = "t-end", default_value_t = 1.0)]
    t_end: f64,
    /// Comma-separated theta values for dense studies.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    theta: Vec<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Integrate,
    Dense,
    Convergence,
    Figure1,
}

impl CommandKind {
    fn name(self) -> &'static str {
        match self {
            CommandKind::Integrate => "integrate",
            CommandKind::Dense => "dense",
            CommandKind::Convergence => "convergence",
            CommandKind::Figure1 => "figure1",
        }
    }
}

/// Validated command-line configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: CommandKind,
    pub problem: Option<PdSystem>,
    pub scheme: Option<Scheme>,
    pub dense: Option<DenseFormula>,
    pub dt: f64,
    pub t_end: f64,
    pub thetas: Vec<f64>,
    pub levels: usize,
    pub out: PathBuf,
    pub plot: bool,
}

fn resolve_problem(spec: &str) -> Result<PdSystem> {
    if let Some(p) = builtin(spec) {
        return Ok(p);
    }
    let path = Path::new(spec);
    if path.is_file() {
        return load_matrix_file(path);
    }
    Err(Error::usage(format!(
        "unknown problem {spec:?}; valid selectors: {} or a path to a matrix file",
        BUILTIN_NAMES.join(", ")
    )))
}

impl RunConfig {
    fn from_cli(cli: Cli) -> Result<Self> {
        let out = |o: &OutputArgs, kind: CommandKind| {
            o.out.clone().unwrap_or_else(|| PathBuf::from(kind.name()))
        };
        let cfg = match cli.command {
            Command::Integrate(a) => RunConfig {
                command: CommandKind::Integrate,
                problem: Some(resolve_problem(&a.problem.problem)?),
                scheme: Some(a.problem.scheme.parse()?),
                dense: None,
                dt: a.dt,
                t_end: a.t_end,
                thetas: Vec::new(),
                levels: 0,
                out: out(&a.output, CommandKind::Integrate),
                plot: a.output.plot,
            },
            Command::Dense(a) => RunConfig {
                command: CommandKind::Dense,
                problem: Some(resolve_problem(&a.problem.problem)?),
                scheme: Some(a.problem.scheme.parse()?),
                dense: Some(a.dense.parse()?),
                dt: a.dt,
                t_end: a.t_end,
                thetas: a.theta,
                levels: 0,
                out: out(&a.output, CommandKind::Dense),
                plot: a.output.plot,
            },
            Command::Convergence(a) => RunConfig {
                command: CommandKind::Convergence,
                problem: Some(resolve_problem(&a.problem.problem)?),
                scheme: Some(a.problem.scheme.parse()?),
                dense: a.dense.as_deref().map(str::parse).transpose()?,
                dt: a.dt0,
                t_end: a.t_end,
                thetas: a.theta,
                levels: a.levels,
                out: out(&a.output, CommandKind::Convergence),
                plot: a.output.plot,
            },
            Command::Figure1(o) => RunConfig {
                command: CommandKind::Figure1,
                problem: None,
                scheme: None,
                dense: None,
                dt: 0.0,
                t_end: 0.0,
                thetas: Vec::new(),
                levels: 0,
                out: out(&o, CommandKind::Figure1),
                plot: o.plot,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if let (Some(dense), Some(scheme)) = (self.dense, &self.scheme) {
            dense.check_pairing(scheme)?;
        }
        if let Some(th) = self.thetas.iter().find(|th| !(0.0..=1.0).contains(*th)) {
            return Err(Error::usage(format!("theta must lie in [0, 1], got {th}")));
        }
        if self.command != CommandKind::Figure1 {
            if !(self.dt > 0.0) || !self.dt.is_finite() {
                return Err(Error::usage(format!("step size must be positive, got {}", self.dt)));
            }
            if !(self.t_end > 0.0) || !self.t_end.is_finite() {
                return Err(Error::usage(format!("t-end must be positive, got {}", self.t_end)));
            }
        }
        if self.command == CommandKind::Dense && self.thetas.is_empty() {
            return Err(Error::usage("dense needs at least one theta"));
        }
        Ok(())
    }

    fn with_extension(&self, ext: &str) -> PathBuf {
        let mut s = self.out.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    }
}

/// Formats a number with 17 significant digits in scientific notation.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn state_header(n: usize) -> String {
    (1..=n).map(|k| format!("y_{k}")).collect::<Vec<_>>().join(",")
}

fn state_fields(y: &[f64]) -> String {
    y.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(",")
}

/// Parses, runs and reports; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match RunConfig::from_cli(cli).and_then(|cfg| execute(&cfg)) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("mprk: {e}");
            e.exit_code()
        }
    }
}

/// Runs a validated configuration, writing its outputs; returns a one-line summary.
pub fn execute(cfg: &RunConfig) -> Result<String> {
    match cfg.command {
        CommandKind::Integrate => run_integrate(cfg),
        CommandKind::Dense => run_dense(cfg),
        CommandKind::Convergence => run_convergence(cfg),
        CommandKind::Figure1 => run_figure1(cfg),
    }
}

fn parts(cfg: &RunConfig) -> (&PdSystem, &Scheme) {
    (
        cfg.problem.as_ref().expect("problem resolved"),
        cfg.scheme.as_ref().expect("scheme resolved"),
    )
}

fn run_integrate(cfg: &RunConfig) -> Result<String> {
    let (pds, scheme) = parts(cfg);
    let y0 = pds.initial_state();
    let records = integrate(scheme, pds, y0, cfg.t_end, cfg.dt)?;
    let n = pds.dim();
    let mut rows: Vec<(f64, &[f64])> = vec![(0.0, y0)];
    rows.extend(records.iter().map(|r| (r.t_next(), r.y_next.as_slice())));

    let mut csv = format!("t,{},mass\n", state_header(n));
    for (t, y) in &rows {
        let _ = writeln!(csv, "{},{},{}", fmt_num(*t), state_fields(y), fmt_num(mass(y)));
    }
    std::fs::write(cfg.with_extension("csv"), csv)?;
    if cfg.plot {
        let series: Vec<Series> = (0..n)
            .map(|k| {
                Series::line(format!("y_{}", k + 1), rows.iter().map(|(t, y)| (*t, y[k])).collect())
                    .with_markers()
            })
            .collect();
        emit_svg(&cfg.with_extension("svg"), &series, "t", "y")?;
    }
    let last = rows.last().expect("initial row");
    Ok(format!(
        "{} on {}: {} steps, final mass {}",
        scheme,
        pds.name(),
        records.len(),
        fmt_num(mass(last.1))
    ))
}

fn run_dense(cfg: &RunConfig) -> Result<String> {
    let (pds, scheme) = parts(cfg);
    let formula = cfg.dense.expect("dense formula resolved");
    let records = integrate(scheme, pds, pds.initial_state(), cfg.t_end, cfg.dt)?;
    let n = pds.dim();
    let mut csv = format!("t,theta,{},mass,formula\n", state_header(n));
    let mut points = Vec::new();
    for rec in &records {
        for &theta in &cfg.thetas {
            let s = formula.evaluate(rec, theta)?;
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                fmt_num(s.t),
                fmt_num(theta),
                state_fields(&s.values),
                fmt_num(mass(&s.values)),
                formula
            );
            points.push(s);
        }
    }
    std::fs::write(cfg.with_extension("csv"), csv)?;
    if cfg.plot {
        let series: Vec<Series> = (0..n)
            .map(|k| {
                Series::line(
                    format!("y_{} ({formula})", k + 1),
                    points.iter().map(|s| (s.t, s.values[k])).collect(),
                )
            })
            .collect();
        emit_svg(&cfg.with_extension("svg"), &series, "t", "y")?;
    }
    Ok(format!(
        "{formula} on {scheme}: {} points over {} steps",
        points.len(),
        records.len()
    ))
}

fn run_convergence(cfg: &RunConfig) -> Result<String> {
    let (pds, scheme) = parts(cfg);
    let mut study = StudyConfig::nodal(scheme.clone(), cfg.t_end, cfg.dt, cfg.levels);
    if let Some(dense) = cfg.dense {
        study = study.with_dense(dense, &cfg.thetas);
    }
    let report = convergence_study(pds, &study)?;
    let mut csv = String::from("dt,error,eoc\n");
    for (i, (dt, err)) in report.dts.iter().zip(&report.errors).enumerate() {
        let eoc = if i == 0 { String::new() } else { fmt_num(report.eocs[i - 1]) };
        let _ = writeln!(csv, "{},{},{}", fmt_num(*dt), fmt_num(*err), eoc);
    }
    std::fs::write(cfg.with_extension("csv"), csv)?;
    if cfg.plot {
        let pts = report
            .dts
            .iter()
            .zip(&report.errors)
            .filter(|(_, e)| **e > 0.0)
            .map(|(d, e)| (d.log10(), e.log10()))
            .collect();
        let label = match cfg.dense {
            Some(d) => format!("{scheme} + {d}"),
            None => scheme.to_string(),
        };
        emit_svg(
            &cfg.with_extension("svg"),
            &[Series::line(label, pts).with_markers()],
            "log10(dt)",
            "log10(error)",
        )?;
    }
    Ok(format!(
        "mean eoc over last 3 pairs: {:.4}",
        report.mean_tail_eoc(3)
    ))
}

fn run_figure1(cfg: &RunConfig) -> Result<String> {
    let data = figure1_experiment()?;
    let mut csv = String::from("t,curve,y1\n");
    for p in &data.points {
        let _ = writeln!(csv, "{},{},{}", fmt_num(p.t), p.curve.label(), fmt_num(p.y[0]));
    }
    std::fs::write(cfg.with_extension("csv"), csv)?;
    if cfg.plot {
        let series: Vec<Series> = [Curve::Nodal, Curve::Explicit, Curve::Implicit]
            .into_iter()
            .map(|c| {
                let s = Series::line(c.label(), data.curve(c).map(|p| (p.t, p.y[0])).collect());
                if c == Curve::Nodal {
                    s.with_markers()
                } else {
                    s
                }
            })
            .collect();
        emit_svg(&cfg.with_extension("svg"), &series, "t", "y1")?;
    }
    Ok(format!(
        "min y1: nodal {}, explicit {}, implicit {}",
        fmt_num(data.min_nodal),
        fmt_num(data.min_explicit),
        fmt_num(data.min_implicit)
    ))
}
