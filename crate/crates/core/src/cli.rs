//! Command-line front end: flag and config parsing, dispatch, CSV/JSON output.
//!
//! Exit codes: 0 success, 1 failed verification or computation, 2 usage or
//! parse error, 3 I/O failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{QError, Result};
use crate::funcspace::{default_nodes, sample, FunctionSpec, GridFunction};
use crate::qcore::{PrecisionTier, QContext};
use crate::verify::{self, Suite};
use crate::{durrmeyer, extremal, growth, qcore, taylor};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Seventeen significant digits in scientific notation.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Fifteen significant digits, shortest form; used for values printed to a terminal.
pub fn fmt_short(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.14e}").parse().expect("formatted float");
    let s = format!("{rounded:?}");
    s.strip_suffix(".0").map(str::to_owned).unwrap_or(s)
}

#[derive(Debug, Parser)]
#[command(name = "qdurr", version, about = "Limit q-Durrmeyer operator laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Evaluate D f at one point
    Eval(Flags),
    /// Table of the coefficients A_k
    Coeffs(Flags),
    /// Taylor coefficients c_k with error estimates
    Taylor(Flags),
    /// Growth profile y(r) = ln M(r) - ln(-r;q)_inf
    Growth(Flags),
    /// Lower-bound report for the extremal family
    Sharpness(Flags),
    /// Run a named verification suite
    Verify(Flags),
}

/// Every option; also the schema of the `--config` JSON file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Flags {
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<f64>,
    /// Function spec, e.g. monomial:2, power:0.5, sharp:2, file:data.csv
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    /// Complex point as re,im
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
    /// interval, entire or taylor
    #[arg(long)]
    pub rep: Option<String>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub r_points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub angles: Option<usize>,
    /// standard or extended
    #[arg(long)]
    pub precision: Option<String>,
    #[arg(long)]
    pub eps_term: Option<f64>,
    #[arg(long)]
    pub eps_tail: Option<f64>,
    #[arg(long)]
    pub max_terms: Option<usize>,
    /// Node count J for catalog functions
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// identities, operator, taylor, growth, extremal or all
    #[arg(long)]
    pub suite: Option<String>,
}

impl Flags {
    /// Fields set here win over those of `base`.
    fn over(self, base: Flags) -> Flags {
        Flags {
            q: self.q.or(base.q),
            f: self.f.or(base.f),
            x: self.x.or(base.x),
            z: self.z.or(base.z),
            rep: self.rep.or(base.rep),
            k_max: self.k_max.or(base.k_max),
            r_min: self.r_min.or(base.r_min),
            r_max: self.r_max.or(base.r_max),
            r_points: self.r_points.or(base.r_points),
            lambda: self.lambda.or(base.lambda),
            angles: self.angles.or(base.angles),
            precision: self.precision.or(base.precision),
            eps_term: self.eps_term.or(base.eps_term),
            eps_tail: self.eps_tail.or(base.eps_tail),
            max_terms: self.max_terms.or(base.max_terms),
            nodes: self.nodes.or(base.nodes),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
            config: self.config,
            suite: self.suite.or(base.suite),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eval,
    Coeffs,
    Taylor,
    Growth,
    Sharpness,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rep {
    Interval,
    Entire,
    Taylor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Real(f64),
    Complex(Complex64),
}

/// Fully resolved invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub ctx: QContext,
    pub flags: Flags,
    pub format: Format,
}

/// Parses `monomial:2`, `sharp:2.0`, `file:path.csv` and the other catalog names.
pub fn parse_spec(text: &str) -> Result<FunctionSpec> {
    text.parse()
}

fn parse_complex(text: &str) -> Result<Complex64> {
    let bad = || QError::Parse {
        pos: 0,
        msg: format!("expected a complex point as re,im, found {text:?}"),
    };
    let (re, im) = text.split_once(',').ok_or_else(bad)?;
    let re: f64 = re.trim().parse().map_err(|_| bad())?;
    let im: f64 = im.trim().parse().map_err(|_| bad())?;
    if !(re.is_finite() && im.is_finite()) {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

impl RunConfig {
    fn resolve(command: Command, flags: Flags) -> Result<Self> {
        let flags = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                let base: Flags = serde_json::from_str(&text).map_err(|e| QError::Input {
                    path: path.clone(),
                    msg: e.to_string(),
                })?;
                flags.over(base)
            }
            None => flags,
        };
        let q = flags
            .q
            .ok_or_else(|| QError::InvalidParameter("--q is required".into()))?;
        let precision = match flags.precision.as_deref() {
            None | Some("extended") => PrecisionTier::Extended,
            Some("standard") => PrecisionTier::Standard,
            Some(other) => {
                return Err(QError::InvalidParameter(format!(
                    "precision must be standard or extended, got {other:?}"
                )))
            }
        };
        let ctx = QContext::with_policy(
            q,
            flags.eps_term.unwrap_or(QContext::DEFAULT_EPS_TERM),
            flags.eps_tail.unwrap_or(QContext::DEFAULT_EPS_TAIL),
            flags.max_terms.unwrap_or(QContext::DEFAULT_MAX_TERMS),
            precision,
        )?;
        let format = match flags.format.as_deref() {
            None | Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            Some(other) => {
                return Err(QError::InvalidParameter(format!(
                    "format must be csv or json, got {other:?}"
                )))
            }
        };
        Ok(Self {
            command,
            ctx,
            flags,
            format,
        })
    }

    fn function(&self) -> Result<GridFunction> {
        let text = self
            .flags
            .f
            .as_deref()
            .ok_or_else(|| QError::InvalidParameter("--f is required".into()))?;
        let spec = parse_spec(text)?;
        let nodes = self.flags.nodes.unwrap_or_else(|| default_nodes(&self.ctx));
        sample(&spec, &self.ctx, nodes)
    }

    fn point(&self) -> Result<Point> {
        match (self.flags.x, self.flags.z.as_deref()) {
            (Some(x), None) => Ok(Point::Real(x)),
            (None, Some(z)) => Ok(Point::Complex(parse_complex(z)?)),
            (Some(_), Some(_)) => Err(QError::InvalidParameter("give either --x or --z, not both".into())),
            (None, None) => Err(QError::InvalidParameter("--x or --z is required".into())),
        }
    }

    fn rep(&self, point: Point) -> Result<Rep> {
        match self.flags.rep.as_deref() {
            Some("interval") => Ok(Rep::Interval),
            Some("entire") => Ok(Rep::Entire),
            Some("taylor") => Ok(Rep::Taylor),
            Some(other) => Err(QError::InvalidParameter(format!(
                "rep must be interval, entire or taylor, got {other:?}"
            ))),
            None => Ok(match point {
                Point::Real(_) => Rep::Interval,
                Point::Complex(_) => Rep::Entire,
            }),
        }
    }

    fn r_grid(&self) -> Result<Vec<f64>> {
        growth::geometric_grid(
            self.flags.r_min.unwrap_or(growth::DEFAULT_R_MIN),
            self.flags.r_max.unwrap_or(growth::DEFAULT_R_MAX),
            self.flags.r_points.unwrap_or(growth::DEFAULT_R_POINTS),
        )
    }
}

/// A cell of an output table.
#[derive(Debug, Clone)]
enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(v) => fmt_float(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Int(i) => (*i).into(),
            Cell::Num(v) => serde_json::Number::from_f64(*v)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Cell::Text(s) => s.clone().into(),
            Cell::Bool(b) => (*b).into(),
        }
    }
}

struct Table {
    headers: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(headers: Vec<&'static str>) -> Self {
        Self {
            headers,
            rows: Vec::new(),
        }
    }

    fn render(&self, format: Format) -> Result<String> {
        let mut out = Vec::new();
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(&mut out);
                w.write_record(&self.headers).map_err(csv_err)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv)).map_err(csv_err)?;
                }
                w.flush()?;
            }
            Format::Json => {
                // fields in column order
                for row in &self.rows {
                    let fields: Vec<String> = self
                        .headers
                        .iter()
                        .zip(row)
                        .map(|(h, c)| format!("{}:{}", serde_json::Value::from(*h), c.json()))
                        .collect();
                    out.extend_from_slice(format!("{{{}}}\n", fields.join(",")).as_bytes());
                }
            }
        }
        Ok(String::from_utf8(out).expect("utf-8 output"))
    }
}

fn csv_err(e: csv::Error) -> QError {
    QError::Io(std::io::Error::other(e))
}

/// Writes `text` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| QError::Io(e.error))?;
    Ok(())
}

/// What a command produced: a table for `--out` or stdout, an optional
/// terminal line replacing the table on stdout, notes for stderr, and whether
/// every check held.
struct Outcome {
    table: Table,
    line: Option<String>,
    notes: Vec<String>,
    passed: bool,
}

fn eval(cfg: &RunConfig) -> Result<Outcome> {
    let point = cfg.point()?;
    let rep = cfg.rep(point)?;
    let gf = cfg.function()?;
    let z = match point {
        Point::Real(x) => Complex64::new(x, 0.0),
        Point::Complex(z) => z,
    };
    let value = match rep {
        Rep::Interval => {
            if z.im != 0.0 {
                return Err(QError::Domain("the interval representation needs a real point in [0,1]".into()));
            }
            Complex64::new(durrmeyer::eval_interval(&gf, z.re, &cfg.ctx)?, 0.0)
        }
        Rep::Entire => durrmeyer::eval_entire(&gf, z, &cfg.ctx)?,
        Rep::Taylor => {
            let series = growth::series_for_radius(&gf, z.norm().max(1.0), &cfg.ctx)?;
            taylor::eval_taylor(&series, z)?
        }
    };
    let (table, line) = match point {
        Point::Real(x) => {
            let mut t = Table::new(vec!["x", "value"]);
            t.rows.push(vec![Cell::Num(x), Cell::Num(value.re)]);
            (t, fmt_short(value.re))
        }
        Point::Complex(z) => {
            let mut t = Table::new(vec!["z_re", "z_im", "re", "im"]);
            t.rows
                .push(vec![Cell::Num(z.re), Cell::Num(z.im), Cell::Num(value.re), Cell::Num(value.im)]);
            (t, format!("{},{}", fmt_short(value.re), fmt_short(value.im)))
        }
    };
    Ok(Outcome {
        table,
        line: Some(line),
        notes: Vec::new(),
        passed: true,
    })
}

fn coeffs(cfg: &RunConfig) -> Result<Outcome> {
    let gf = cfg.function()?;
    let k_max = cfg.flags.k_max.unwrap_or(durrmeyer::DEFAULT_COEFFS);
    let values = taylor::node_values(&gf, k_max, &cfg.ctx)?;
    let mut table = Table::new(vec!["k", "A_k"]);
    for (k, a) in values.into_iter().enumerate() {
        table.rows.push(vec![Cell::Int(k as i64), Cell::Num(a)]);
    }
    Ok(Outcome {
        table,
        line: None,
        notes: Vec::new(),
        passed: true,
    })
}

fn taylor_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let gf = cfg.function()?;
    let k_max = cfg.flags.k_max.unwrap_or(20);
    let series = taylor::taylor_coeffs(&gf, k_max, &cfg.ctx)?;
    let mut table = Table::new(vec!["k", "c_k", "err_k"]);
    for (k, t) in series.terms.iter().enumerate() {
        table
            .rows
            .push(vec![Cell::Int(k as i64), Cell::Num(t.coeff), Cell::Num(t.coeff_err())]);
    }
    let notes = match series.bits {
        Some(bits) => vec![format!("extended precision, {bits} bits")],
        None => vec!["standard precision".into()],
    };
    Ok(Outcome {
        table,
        line: None,
        notes,
        passed: true,
    })
}

fn growth_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let gf = cfg.function()?;
    let grid = cfg.r_grid()?;
    let angles = cfg.flags.angles.unwrap_or(growth::DEFAULT_ANGLES);
    let p = growth::growth_profile_with(&gf, &grid, angles, &cfg.ctx)?;
    let mut table = Table::new(vec!["r", "log_M", "log_env", "y", "theta_max"]);
    for i in 0..p.r_grid.len() {
        table.rows.push(
            [p.r_grid[i], p.log_m[i], p.log_env[i], p.y[i], p.theta_max[i]]
                .into_iter()
                .map(Cell::Num)
                .collect(),
        );
    }
    let mut notes = vec![format!("crude bound on y: {}", fmt_short(growth::crude_bound(&gf, &cfg.ctx)?))];
    if let Some((lam, rms)) = p.lambda_fit {
        notes.push(format!("fitted decay exponent {} (rms {})", fmt_short(lam), fmt_short(rms)));
    }
    let mut passed = true;
    if let Some(lambda) = cfg.flags.lambda {
        let rep = growth::o_estimate_from_profile(&p, lambda)?;
        passed = rep.passed();
        notes.push(format!(
            "o-estimate at lambda {lambda}: {} (fall {})",
            if passed { "pass" } else { "fail" },
            fmt_short(rep.trend.fall)
        ));
    }
    Ok(Outcome {
        table,
        line: None,
        notes,
        passed,
    })
}

fn sharpness(cfg: &RunConfig) -> Result<Outcome> {
    let lambda = cfg
        .flags
        .lambda
        .ok_or_else(|| QError::InvalidParameter("--lambda is required".into()))?;
    let grid = cfg.r_grid()?;
    let rep = extremal::lower_bound_check(lambda, &grid, &cfg.ctx)?;
    let ln_qq = qcore::qq_inf(&cfg.ctx)?.ln();
    let beta = rep.alpha * cfg.ctx.q();
    let mut table = Table::new(vec!["r", "y", "bound", "slack"]);
    for i in 0..grid.len() {
        let r = grid[i];
        let bound = ln_qq + qcore::log_qpoch_neg(beta * r, &cfg.ctx) - qcore::log_qpoch_neg(r, &cfg.ctx);
        table
            .rows
            .push(vec![Cell::Num(r), Cell::Num(rep.y[i]), Cell::Num(bound), Cell::Num(rep.slack[i])]);
    }
    let notes = vec![
        format!("alpha {}", fmt_short(rep.alpha)),
        format!("min slack {}", fmt_short(rep.min_slack)),
        format!("min divided-difference slack {}", fmt_short(rep.min_divdiff_slack)),
        format!("C estimate {} (floor {})", fmt_short(rep.c_estimate), fmt_short(rep.floor)),
        format!("lower bound {}", if rep.holds() { "holds" } else { "violated" }),
    ];
    Ok(Outcome {
        table,
        line: None,
        notes,
        passed: rep.holds(),
    })
}

fn verify_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let suite: Suite = cfg.flags.suite.as_deref().unwrap_or("all").parse()?;
    let checks = verify::run_suite(suite, &cfg.ctx)?;
    let mut table = Table::new(vec!["suite", "check", "passed", "detail"]);
    let mut lines = Vec::new();
    for c in &checks {
        lines.push(format!(
            "{} [{}] {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.suite,
            c.name,
            c.detail
        ));
        table.rows.push(vec![
            Cell::Text(c.suite.to_string()),
            Cell::Text(c.name.clone()),
            Cell::Bool(c.passed),
            Cell::Text(c.detail.clone()),
        ]);
    }
    let n_pass = checks.iter().filter(|c| c.passed).count();
    lines.push(format!("{suite}: {n_pass}/{} checks passed", checks.len()));
    Ok(Outcome {
        table,
        line: Some(lines.join("\n")),
        notes: Vec::new(),
        passed: n_pass == checks.len(),
    })
}

/// Exit code for an error.
pub fn exit_code(e: &QError) -> i32 {
    match e {
        QError::InvalidParameter(_) | QError::Domain(_) | QError::Parse { .. } | QError::Input { .. } => EXIT_USAGE,
        QError::Io(_) => EXIT_IO,
        QError::NonConvergence { .. } | QError::OrderCap { .. } | QError::Overflow { .. } => EXIT_FAILED,
    }
}

/// Executes a resolved configuration, writing results to `out` and notes to `err`.
pub fn execute(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let outcome = match cfg.command {
        Command::Eval => eval(cfg)?,
        Command::Coeffs => coeffs(cfg)?,
        Command::Taylor => taylor_cmd(cfg)?,
        Command::Growth => growth_cmd(cfg)?,
        Command::Sharpness => sharpness(cfg)?,
        Command::Verify => verify_cmd(cfg)?,
    };
    match &cfg.flags.out {
        Some(path) => {
            write_atomic(path, &outcome.table.render(cfg.format)?)?;
            if let Some(line) = &outcome.line {
                writeln!(out, "{line}")?;
            }
        }
        None => match &outcome.line {
            Some(line) => writeln!(out, "{line}")?,
            None => out.write_all(outcome.table.render(cfg.format)?.as_bytes())?,
        },
    }
    for note in &outcome.notes {
        writeln!(err, "{note}")?;
    }
    Ok(if outcome.passed { EXIT_OK } else { EXIT_FAILED })
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let (command, flags) = match cli.command {
        Cmd::Eval(f) => (Command::Eval, f),
        Cmd::Coeffs(f) => (Command::Coeffs, f),
        Cmd::Taylor(f) => (Command::Taylor, f),
        Cmd::Growth(f) => (Command::Growth, f),
        Cmd::Sharpness(f) => (Command::Sharpness, f),
        Cmd::Verify(f) => (Command::Verify, f),
    };
    match RunConfig::resolve(command, flags).and_then(|cfg| execute(&cfg, out, err)) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs with the process arguments and standard streams.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
