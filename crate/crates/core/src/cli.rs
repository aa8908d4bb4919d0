//! Command-line front end: `norm`, `interp` and `verify`.
//!
//! Exit codes: 0 on success, 1 when a selected check fails, 2 on any
//! configuration, parse or numerical error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::{self, CoupleLevel};
use crate::linalg::C64;
use crate::spaces::{MatrixTuple, SolverParams, SpaceStructure};
use crate::verify::{self, CheckReport, SuiteOptions};

pub const MAX_N: usize = 6;
pub const MAX_LEVEL: usize = 4;
pub const MAX_SAMPLES: usize = 1000;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "opspace", version, about = "Operator space norms, complex interpolation and verification checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Level norm of a tuple read from a file.
    Norm(NormArgs),
    /// Certified bracket of an interpolation norm at θ.
    Interp(InterpArgs),
    /// Run verification checks and write a report array.
    Verify(VerifyArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Space {
    Row,
    Column,
    Oh,
    /// R ∩ C
    Intersection,
    /// R + C
    Sum,
    /// (R, C)_θ
    Interpolated,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Couple {
    LinfL1,
    #[value(name = "rc", alias = "RC")]
    Rc,
    Equal,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    #[arg(long, env = "OPSPACE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Strip polynomial degree.
    #[arg(long)]
    pub degree: Option<usize>,
    /// Boundary points per arc.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Iteration budget per optimization stage.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, conflicts_with = "parallel")]
    pub serial: bool,
    #[arg(long)]
    pub parallel: bool,
}

impl CommonArgs {
    fn solver(&self) -> Result<SolverParams> {
        let d = SolverParams::default();
        let s = SolverParams {
            degree: self.degree.unwrap_or(d.degree),
            grid: self.grid.unwrap_or(d.grid),
            restarts: self.restarts.unwrap_or(d.restarts),
            max_iters: self.iters.unwrap_or(d.max_iters),
            seed: self.seed,
            parallel: self.parallel && !self.serial,
            ..d
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Args, Debug)]
pub struct NormArgs {
    #[arg(long, value_enum)]
    pub space: Space,
    /// Expected coefficient count; must match the input header.
    #[arg(long)]
    pub n: Option<usize>,
    /// Expected level `KxL`; must match the input header.
    #[arg(long)]
    pub level: Option<String>,
    /// Tuple file (`-` for stdin).
    #[arg(long)]
    pub input: PathBuf,
    /// θ for `--space interpolated`.
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct InterpArgs {
    #[arg(long, value_enum)]
    pub couple: Couple,
    /// Endpoint space of `--couple equal`.
    #[arg(long, value_enum, default_value_t = Space::Oh)]
    pub space: Space,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Count failing stretch checks as failures.
    #[arg(long)]
    pub strict: bool,
    /// Zero the runtime field so reports compare byte for byte.
    #[arg(long)]
    pub deterministic: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Parses the plain-text tuple format: a header `n k l`, then `n` blocks of
/// `k` lines with `l` entries `a+bi` each. Blank lines and `#` comments are
/// ignored.
pub fn parse_tuple(text: &str) -> Result<MatrixTuple> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header `n k l`".into() })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| Error::Parse { line: hline, msg: format!("bad dimension '{t}'") }))
        .collect::<Result<_>>()?;
    let [n, k, l] = dims[..] else {
        return Err(Error::Parse { line: hline, msg: format!("header needs 3 dimensions, found {}", dims.len()) });
    };
    if n == 0 || k == 0 || l == 0 {
        return Err(Error::Parse { line: hline, msg: "dimensions must be positive".into() });
    }
    if n > MAX_N || k > MAX_LEVEL || l > MAX_LEVEL {
        return Err(Error::Config(format!("tuple {n} {k} {l} exceeds the caps n ≤ {MAX_N}, k, l ≤ {MAX_LEVEL}")));
    }
    let mut flat = Vec::with_capacity(n * k * l);
    for _ in 0..n * k {
        let (ln, row) = lines.next().ok_or(Error::Parse {
            line: text.lines().count().max(1),
            msg: format!("expected {} matrix rows, input ended early", n * k),
        })?;
        let entries: Vec<&str> = row.split_whitespace().collect();
        if entries.len() != l {
            return Err(Error::Parse { line: ln, msg: format!("expected {l} entries, found {}", entries.len()) });
        }
        for e in entries {
            let z: C64 = e.parse().map_err(|_| Error::Parse { line: ln, msg: format!("bad complex entry '{e}'") })?;
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::Parse { line: ln, msg: format!("non-finite entry '{e}'") });
            }
            flat.push(z);
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::Parse { line: ln, msg: "trailing data after the last block".into() });
    }
    MatrixTuple::from_flat(n, k, l, &flat)
}

/// Writes a tuple in the format read by [`parse_tuple`].
pub fn format_tuple(a: &MatrixTuple) -> String {
    let mut out = format!("{} {} {}\n", a.n(), a.k(), a.l());
    for (i, m) in a.mats().iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for r in 0..m.rows() {
            let row: Vec<String> = (0..m.cols()).map(|c| format_entry(m.get(r, c))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

fn format_entry(z: C64) -> String {
    format!("{:e}{:+e}i", z.re, z.im)
}

fn parse_level(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("level must look like KxL, got '{s}'"));
    let (k, l) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let (k, l) = (k.trim().parse().map_err(|_| bad())?, l.trim().parse().map_err(|_| bad())?);
    if k == 0 || l == 0 || k > MAX_LEVEL || l > MAX_LEVEL {
        return Err(Error::Config(format!("level {k}x{l} outside 1..={MAX_LEVEL}")));
    }
    Ok((k, l))
}

fn read_input(path: &PathBuf) -> Result<MatrixTuple> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(|e| Error::Config(format!("reading stdin: {e}")))?;
        s
    } else {
        fs::read_to_string(path).map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?
    };
    parse_tuple(&text)
}

fn structure(space: Space, n: usize, theta: f64, solver: &SolverParams) -> Result<SpaceStructure> {
    let (r, c) = (SpaceStructure::Row(n), SpaceStructure::Column(n));
    match space {
        Space::Row => Ok(r),
        Space::Column => Ok(c),
        Space::Oh => Ok(SpaceStructure::Oh(n)),
        Space::Intersection => SpaceStructure::intersection(r, c),
        Space::Sum => SpaceStructure::sum(r, c, solver.clone()),
        Space::Interpolated => SpaceStructure::interpolated(r, c, theta, solver.clone()),
    }
}

#[derive(Serialize)]
struct NormOutput {
    space: String,
    n: usize,
    k: usize,
    l: usize,
    value: f64,
    /// Present when the value is an optimization upper bound.
    lower: Option<f64>,
}

#[derive(Serialize)]
struct InterpOutput {
    couple: String,
    theta: f64,
    n: usize,
    k: usize,
    l: usize,
    lower: f64,
    upper: f64,
    relative_width: f64,
    delta_lower: f64,
    delta_upper: f64,
    upper_converged: bool,
    lower_converged: bool,
    rho: f64,
    degree: usize,
}

fn emit(common: &CommonArgs, body: String) -> Result<()> {
    match &common.output {
        Some(p) => fs::write(p, body).map_err(|e| Error::Config(format!("writing {}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(body.as_bytes()).and_then(|_| out.flush()).map_err(|e| Error::Config(format!("writing stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Numerical(format!("serializing output: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn to_csv(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Numerical(format!("writing csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(format!("writing csv: {e}")))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cmd_norm(args: &NormArgs) -> Result<i32> {
    let solver = args.common.solver()?;
    let a = read_input(&args.input)?;
    check_shape(&a, args.n, args.level.as_deref())?;
    let s = structure(args.space, a.n(), args.theta, &solver)?;
    let (lower, value) = s.level_bounds(&a)?;
    let exact = matches!(args.space, Space::Row | Space::Column | Space::Oh | Space::Intersection);
    let out = NormOutput { space: s.name(), n: a.n(), k: a.k(), l: a.l(), value, lower: (!exact).then_some(lower) };
    let body = match args.common.format {
        Format::Json => to_json(&out)?,
        Format::Csv => to_csv(
            &["space", "n", "k", "l", "value", "lower"],
            vec![vec![out.space.clone(), out.n.to_string(), out.k.to_string(), out.l.to_string(), out.value.to_string(), opt(out.lower)]],
        )?,
        Format::Text => match out.lower {
            Some(lo) => format!("{} level {}x{}: {} (lower bound {})\n", out.space, out.k, out.l, out.value, lo),
            None => format!("{} level {}x{}: {}\n", out.space, out.k, out.l, out.value),
        },
    };
    emit(&args.common, body)?;
    Ok(EXIT_OK)
}

fn check_shape(a: &MatrixTuple, n: Option<usize>, level: Option<&str>) -> Result<()> {
    if let Some(n) = n {
        if n == 0 || n > MAX_N {
            return Err(Error::Config(format!("--n {n} outside 1..={MAX_N}")));
        }
        if n != a.n() {
            return Err(Error::Dimension(format!("--n {n} but the input has {} coefficients", a.n())));
        }
    }
    if let Some(level) = level {
        let (k, l) = parse_level(level)?;
        if (k, l) != (a.k(), a.l()) {
            return Err(Error::Dimension(format!("--level {k}x{l} but the input is at level {}x{}", a.k(), a.l())));
        }
    }
    Ok(())
}

fn cmd_interp(args: &InterpArgs) -> Result<i32> {
    let solver = args.common.solver()?;
    let a = read_input(&args.input)?;
    let n = a.n();
    let (couple, label) = match args.couple {
        Couple::LinfL1 => {
            if a.k() != 1 || a.l() != 1 {
                return Err(Error::Config("the linf-l1 couple takes scalar tuples (level 1x1)".into()));
            }
            (CoupleLevel::linf_l1(n), format!("(linf_{n}, l1_{n})"))
        }
        Couple::Rc => (
            CoupleLevel::from_structures(&SpaceStructure::Row(n), &SpaceStructure::Column(n), a.k(), a.l())?,
            format!("(R_{n}, C_{n})"),
        ),
        Couple::Equal => {
            let s = structure(args.space, n, args.theta, &solver)?;
            let dual = s.dual_level_oracle(a.k(), a.l()).ok();
            (CoupleLevel::equal(s.level_oracle(a.k(), a.l())?, dual), format!("({0}, {0})", s.name()))
        }
    };
    let b = interp::interp_norm_bounds(&couple, args.theta, &a.to_flat(), &solver)?;
    let out = InterpOutput {
        couple: label,
        theta: args.theta,
        n,
        k: a.k(),
        l: a.l(),
        lower: b.lower,
        upper: b.upper,
        relative_width: b.relative_width(),
        delta_lower: b.delta_lower,
        delta_upper: b.delta_upper,
        upper_converged: b.upper_converged,
        lower_converged: b.lower_converged,
        rho: b.upper_witness.rho,
        degree: b.upper_witness.degree(),
    };
    let body = match args.common.format {
        Format::Json => to_json(&out)?,
        Format::Csv => to_csv(
            &["couple", "theta", "lower", "upper", "relative_width", "delta_lower", "delta_upper", "upper_converged", "lower_converged"],
            vec![vec![
                out.couple.clone(),
                out.theta.to_string(),
                out.lower.to_string(),
                out.upper.to_string(),
                out.relative_width.to_string(),
                out.delta_lower.to_string(),
                out.delta_upper.to_string(),
                out.upper_converged.to_string(),
                out.lower_converged.to_string(),
            ]],
        )?,
        Format::Text => format!(
            "{}_{} at level {}x{}: [{}, {}] (relative width {:.4}; witness degree {}, rho {:.6})\n",
            out.couple, out.theta, out.k, out.l, out.lower, out.upper, out.relative_width, out.degree, out.rho
        ),
    };
    emit(&args.common, body)?;
    Ok(EXIT_OK)
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let solver = args.common.solver()?;
    if let Some(s) = args.samples {
        if s == 0 || s > MAX_SAMPLES {
            return Err(Error::Config(format!("--samples {s} outside 1..={MAX_SAMPLES}")));
        }
    }
    let opts = SuiteOptions { n: args.n, k: args.k, m: args.m, samples: args.samples, solver };
    let mut reports = verify::run_suite(&args.suite, &opts)?;
    if args.deterministic {
        reports = reports.into_iter().map(CheckReport::without_timing).collect();
    }
    let failed = reports.iter().any(|r| r.fails(args.strict));
    let body = match args.common.format {
        Format::Json => to_json(&reports)?,
        Format::Csv => to_csv(
            &["check", "pass", "stretch", "margin", "tolerance", "lhs", "rhs", "lower", "upper", "flags", "runtime_ms", "seed", "params"],
            reports
                .iter()
                .map(|r| {
                    vec![
                        r.check.clone(),
                        r.pass.to_string(),
                        r.stretch.to_string(),
                        r.margin.to_string(),
                        r.tolerance.to_string(),
                        opt(r.values.lhs),
                        opt(r.values.rhs),
                        opt(r.values.lower),
                        opt(r.values.upper),
                        r.flags.join(";"),
                        r.runtime_ms.to_string(),
                        r.seed.to_string(),
                        serde_json::Value::Object(r.params.clone()).to_string(),
                    ]
                })
                .collect(),
        )?,
        Format::Text => reports
            .iter()
            .map(|r| {
                let status = if r.pass { "PASS" } else if r.stretch && !args.strict { "FAIL (report-only)" } else { "FAIL" };
                format!("{status} {} margin={:.3e} tol={:e} runtime={}ms\n", r.check, r.margin, r.tolerance, r.runtime_ms)
            })
            .collect(),
    };
    emit(&args.common, body)?;
    Ok(if failed { EXIT_CHECK_FAILED } else { EXIT_OK })
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Norm(a) => cmd_norm(a),
        Command::Interp(a) => cmd_interp(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("opspace: {e}");
            EXIT_CONFIG
        }
    }
}
