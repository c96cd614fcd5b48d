//! Command-line front end.
//!
//! ```text
//! socp-alm solve --problem <path|builtin:name> [--rho0 R] [--tol T] [--trace out.csv] [--report out.json] ...
//! socp-alm check <sosc|dualqual|growth|errorbound|example32> [--problem ...] [--report out.json]
//! socp-alm rate  --problem ... --rho-list 100,200,400 [--out table.csv]
//! ```
//!
//! Exit codes: `0` success, `1` algorithmic failure or a check with an
//! unexpected outcome, `2` usage or input error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::alm::{self, AlmConfig, AlmStatus, AlmTrace, EpsRule};
use crate::diagnostics;
use crate::error::{Error, Result};
use crate::model::{builtin_by_name, load_problem, SocpProblem};
use crate::sampling;
use crate::variational::{self, DualQualOptions, SoscOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "socp-alm", version, about = "Augmented Lagrangian method for second-order cone programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the ALM on a problem.
    Solve(SolveArgs),
    /// Second-order certificates and diagnostics at the known solution.
    Check {
        #[command(subcommand)]
        which: CheckCommand,
    },
    /// Contraction factor of the outer iteration for several constant penalties.
    Rate(RateArgs),
}

#[derive(Debug, Args, Clone)]
struct ProblemArgs {
    /// Problem file or `builtin:<name>`.
    #[arg(long, default_value = "builtin:example_3_2")]
    problem: String,
    /// Point `a` of the `projection` built-in.
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    a: Option<FloatList>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    m: Option<u64>,
    /// `InteriorQ`, `BoundaryQNonzero` or `Zero` for the `planted` built-in.
    #[arg(long)]
    region: Option<String>,
    /// Seed for generated problems and sampled checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    alm: AlmArgs,
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    x0: Option<FloatList>,
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    lambda0: Option<FloatList>,
    /// Per-iteration CSV trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// JSON summary.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct AlmArgs {
    #[arg(long)]
    rho0: Option<f64>,
    #[arg(long)]
    rho_bar: Option<f64>,
    #[arg(long)]
    rho_growth: Option<f64>,
    #[arg(long)]
    rho_max: Option<f64>,
    /// `ε_k = η σ_k`.
    #[arg(long)]
    eps_eta: Option<f64>,
    /// Solve every subproblem to the machine floor.
    #[arg(long, conflicts_with = "eps_eta")]
    exact: bool,
    /// Outer tolerance on the KKT residual.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// JSON file with any of the fields above (snake_case); its values win over flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Overrides read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    rho0: Option<f64>,
    rho_bar: Option<f64>,
    rho_growth: Option<f64>,
    rho_max: Option<f64>,
    eps_eta: Option<f64>,
    exact: Option<bool>,
    tol: Option<f64>,
    max_outer: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum CheckCommand {
    Sosc(CheckArgs),
    Dualqual(CheckArgs),
    Growth(GrowthArgs),
    Errorbound(ErrorBoundArgs),
    /// Closed-form ratio along the multipliers `(−1, t, √(1−t²))`.
    Example32 {
        #[arg(long, value_parser = parse_list, required = true)]
        t: FloatList,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Expect {
    Holds,
    Fails,
    Any,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Primal point (defaults to the known solution).
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    x: Option<FloatList>,
    /// Multiplier (defaults to the known solution).
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    lambda: Option<FloatList>,
    /// Outcome that counts as success for the exit code.
    #[arg(long, value_enum, default_value_t = Expect::Holds)]
    expect: Expect,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GrowthArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_parser = parse_list, default_value = "1,10,100,1000,10000,100000,1000000")]
    rho_list: FloatList,
    #[arg(long, default_value_t = 200)]
    x_samples: usize,
    #[arg(long, default_value_t = 8)]
    lambda_samples: usize,
    #[arg(long, value_enum, default_value_t = Expect::Holds)]
    expect: Expect,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ErrorBoundArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 1e-2)]
    radius: f64,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    /// `holds` means the bound is stable across radii (`failed = false`).
    #[arg(long, value_enum, default_value_t = Expect::Holds)]
    expect: Expect,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    alm: AlmArgs,
    #[arg(long, value_parser = parse_list, required = true)]
    rho_list: FloatList,
    /// Distance of the default start from the known solution.
    #[arg(long, default_value_t = 1e-2)]
    start_dist: f64,
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    x0: Option<FloatList>,
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    lambda0: Option<FloatList>,
    /// Table destination (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Comma-separated decimals taken as one command-line value, e.g. `0,2,0` or `-1,1e-3`.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatList(pub Vec<f64>);

impl std::ops::Deref for FloatList {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

fn parse_list(s: &str) -> std::result::Result<FloatList, String> {
    parse_vec(s).map(FloatList)
}

pub fn parse_vec(s: &str) -> std::result::Result<Vec<f64>, String> {
    let trimmed = s.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    trimmed
        .split(',')
        .map(|tok| {
            let tok = tok.trim();
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{tok}` is not a finite decimal number"))
        })
        .collect()
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Parse { .. }
        | Error::Io(_)
        | Error::UnknownProblem(_)
        | Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. }
        | Error::NoKnownSolution
        | Error::NonFinite(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Entry point shared by the binary and the tests.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Check { which } => cmd_check(which, out),
        Command::Rate(a) => cmd_rate(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code_for(&e)
        }
    }
}

fn load(args: &ProblemArgs) -> Result<SocpProblem> {
    match args.problem.strip_prefix("builtin:") {
        Some(name) => {
            let mut params = serde_json::Map::new();
            if let Some(a) = &args.a {
                params.insert("a".into(), json!(a.0));
            }
            if let Some(n) = args.n {
                params.insert("n".into(), json!(n));
            }
            if let Some(m) = args.m {
                params.insert("m".into(), json!(m));
            }
            if let Some(r) = &args.region {
                params.insert("region".into(), json!(r));
            }
            params.insert("seed".into(), json!(args.seed));
            builtin_by_name(name, &Value::Object(params))
        }
        None => load_problem(&args.problem),
    }
}

fn build_config(a: &AlmArgs, seed: u64) -> Result<AlmConfig> {
    let file = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<ConfigFile>(&text).map_err(|e| Error::Parse {
                field: path.display().to_string(),
                message: e.to_string(),
            })?
        }
        None => ConfigFile::default(),
    };
    let mut cfg = AlmConfig { seed, ..AlmConfig::default() };
    let pick = |file: Option<f64>, flag: Option<f64>, default: f64| file.or(flag).unwrap_or(default);
    cfg.rho0 = pick(file.rho0, a.rho0, cfg.rho0);
    cfg.rho_bar = pick(file.rho_bar, a.rho_bar, cfg.rho_bar.min(cfg.rho0));
    cfg.rho_growth = pick(file.rho_growth, a.rho_growth, cfg.rho_growth);
    cfg.rho_max = pick(file.rho_max, a.rho_max, cfg.rho_max.max(cfg.rho0));
    cfg.outer_tol = pick(file.tol, a.tol, cfg.outer_tol);
    cfg.max_outer = file.max_outer.or(a.max_outer).unwrap_or(cfg.max_outer);
    let exact = file.exact.unwrap_or(a.exact);
    if exact {
        cfg.eps_rule = EpsRule::Exact;
    } else if let Some(eta) = file.eps_eta.or(a.eps_eta) {
        cfg.eps_rule = EpsRule::Proportional(eta);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn vector_or(v: &Option<FloatList>, default: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    match v {
        None => Ok(default),
        Some(v) => {
            crate::error::check_len(what, default.len(), v.len())?;
            Ok(DVector::from_column_slice(v))
        }
    }
}

fn write_json(path: Option<&Path>, value: &Value) -> Result<()> {
    if let Some(path) = path {
        let mut text = serde_json::to_string_pretty(value).expect("serializable report");
        text.push('\n');
        std::fs::write(path, text)?;
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable report")
}

fn vec_json(v: &DVector<f64>) -> Value {
    json!(v.as_slice())
}

fn join(v: &DVector<f64>) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Trace columns: `k, sigma, eps_k, rho_k, inner_iters, grad_norm, value,
/// dist_x, dist_lambda, x, lambda` (the last two `;`-joined). Distances are
/// empty when the problem has no known solution.
pub fn write_trace_csv(w: impl Write, trace: &AlmTrace, p: &SocpProblem) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    csv.write_record([
        "k", "sigma", "eps_k", "rho_k", "inner_iters", "grad_norm", "value", "dist_x", "dist_lambda", "x", "lambda",
    ])
    .map_err(io)?;
    for r in &trace.rows {
        let (dx, dl) = match p.known() {
            Ok(sol) => (
                (&r.x - &sol.x).norm().to_string(),
                diagnostics::dist_to_multiplier_set(p, &r.lambda)?.to_string(),
            ),
            Err(_) => (String::new(), String::new()),
        };
        csv.write_record([
            r.k.to_string(),
            r.sigma.to_string(),
            opt(r.eps),
            r.rho.to_string(),
            r.inner_iters.map(|v| v.to_string()).unwrap_or_default(),
            opt(r.grad_norm),
            opt(r.value),
            dx,
            dl,
            join(&r.x),
            join(&r.lambda),
        ])
        .map_err(io)?;
    }
    csv.flush()?;
    Ok(())
}

fn cmd_solve(a: SolveArgs, out: &mut dyn Write) -> Result<i32> {
    let p = load(&a.problem)?;
    let cfg = build_config(&a.alm, a.problem.seed)?;
    let x0 = vector_or(&a.x0, DVector::zeros(p.n), "--x0")?;
    let l0 = vector_or(&a.lambda0, DVector::zeros(p.m + 1), "--lambda0")?;
    let (sol, trace) = alm::solve(&p, &x0, &l0, &cfg)?;
    if let Some(path) = &a.trace {
        write_trace_csv(std::fs::File::create(path)?, &trace, &p)?;
    }
    let mut report = json!({
        "problem": p.name,
        "status": trace.status.as_str(),
        "sigma": trace.final_sigma(),
        "outer_iterations": trace.outer_iterations(),
        "x": vec_json(&sol.x),
        "lambda": vec_json(&sol.lambda),
        "x0": vec_json(&x0),
        "lambda0": vec_json(&l0),
        "config": to_json(&cfg),
    });
    if p.known().is_ok() {
        report["dist"] = json!(diagnostics::primal_dual_distance(&p, &sol.x, &sol.lambda)?);
    }
    write_json(a.report.as_deref(), &report)?;
    writeln!(
        out,
        "status={} sigma={:e} iters={}",
        trace.status.as_str(),
        trace.final_sigma(),
        trace.outer_iterations()
    )?;
    Ok(if trace.status == AlmStatus::Converged { EXIT_OK } else { EXIT_FAILURE })
}

fn outcome_code(holds: bool, expect: Expect) -> i32 {
    match (expect, holds) {
        (Expect::Any, _) | (Expect::Holds, true) | (Expect::Fails, false) => EXIT_OK,
        _ => EXIT_FAILURE,
    }
}

fn emit(out: &mut dyn Write, report: &Value, path: Option<&Path>) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(report).expect("serializable report"))?;
    write_json(path, report)
}

fn point(p: &SocpProblem, a: &CheckArgs) -> Result<(DVector<f64>, DVector<f64>)> {
    let (dx, dl) = match p.known() {
        Ok(sol) => (Some(sol.x.clone()), Some(sol.lambda.clone())),
        Err(_) => (None, None),
    };
    let x = match (&a.x, dx) {
        (Some(v), _) => vector_or(&Some(v.clone()), DVector::zeros(p.n), "--x")?,
        (None, Some(x)) => x,
        (None, None) => return Err(Error::NoKnownSolution),
    };
    let l = match (&a.lambda, dl) {
        (Some(v), _) => vector_or(&Some(v.clone()), DVector::zeros(p.m + 1), "--lambda")?,
        (None, Some(l)) => l,
        (None, None) => return Err(Error::NoKnownSolution),
    };
    Ok((x, l))
}

fn cmd_check(which: CheckCommand, out: &mut dyn Write) -> Result<i32> {
    match which {
        CheckCommand::Sosc(a) => {
            let p = load(&a.problem)?;
            let (x, l) = point(&p, &a)?;
            let opts = SoscOptions { seed: a.problem.seed, ..SoscOptions::default() };
            let r = variational::check_sosc(&p, &x, &l, &opts)?;
            let mut v = to_json(&r);
            v["problem"] = json!(p.name);
            emit(out, &v, a.report.as_deref())?;
            Ok(outcome_code(r.holds, a.expect))
        }
        CheckCommand::Dualqual(a) => {
            let p = load(&a.problem)?;
            let (x, l) = point(&p, &a)?;
            let opts = DualQualOptions { seed: a.problem.seed, ..DualQualOptions::default() };
            let r = variational::check_dual_qualification(&p, &x, &l, &opts)?;
            let mut v = to_json(&r);
            v["problem"] = json!(p.name);
            emit(out, &v, a.report.as_deref())?;
            Ok(outcome_code(r.holds, a.expect))
        }
        CheckCommand::Growth(a) => {
            let p = load(&a.problem)?;
            let r = diagnostics::certify_growth(&p, &a.rho_list, a.x_samples, a.lambda_samples, a.problem.seed)?;
            let mut v = to_json(&r);
            v["problem"] = json!(p.name);
            emit(out, &v, a.report.as_deref())?;
            Ok(outcome_code(r.ell_hat > 0.0, a.expect))
        }
        CheckCommand::Errorbound(a) => {
            let p = load(&a.problem)?;
            let r = diagnostics::verify_error_bound(&p, a.radius, a.samples, a.problem.seed)?;
            let mut v = to_json(&r);
            v["problem"] = json!(p.name);
            emit(out, &v, a.report.as_deref())?;
            Ok(outcome_code(!r.failed, a.expect))
        }
        CheckCommand::Example32 { t, report } => {
            if t.is_empty() {
                return Err(Error::InvalidParameter("--t needs at least one value".into()));
            }
            let rows = t
                .iter()
                .map(|&t| diagnostics::example32_ratio(t).map(|r| to_json(&r)))
                .collect::<Result<Vec<_>>>()?;
            emit(out, &Value::Array(rows), report.as_deref())?;
            Ok(EXIT_OK)
        }
    }
}

/// One row of the `rate` table.
#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub rho: f64,
    pub q_geomean: f64,
    pub iters: usize,
    pub status: AlmStatus,
    pub sigma: f64,
}

fn default_start(p: &SocpProblem, dist: f64, seed: u64) -> Result<(DVector<f64>, DVector<f64>)> {
    let sol = p.known()?;
    let dir = sampling::unit_sphere(&mut sampling::substream(seed, 0xa1a1), p.n + p.m + 1) * dist;
    Ok((
        &sol.x + dir.rows(0, p.n),
        &sol.lambda + dir.rows(p.n, p.m + 1),
    ))
}

fn cmd_rate(a: RateArgs, out: &mut dyn Write) -> Result<i32> {
    if a.rho_list.is_empty() {
        return Err(Error::InvalidParameter("--rho-list must not be empty".into()));
    }
    let p = load(&a.problem)?;
    let base = build_config(&a.alm, a.problem.seed)?;
    let (dx, dl) = default_start(&p, a.start_dist, a.problem.seed)?;
    let x0 = vector_or(&a.x0, dx, "--x0")?;
    let l0 = vector_or(&a.lambda0, dl, "--lambda0")?;
    let configs = a
        .rho_list
        .iter()
        .map(|&rho| {
            let cfg = AlmConfig {
                rho0: rho,
                rho_bar: rho,
                rho_growth: 1.0,
                rho_max: rho,
                ..base.clone()
            };
            cfg.validate().map(|_| cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<Result<RateRow>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| {
                let (p, x0, l0) = (&p, &x0, &l0);
                s.spawn(move || -> Result<RateRow> {
                    let (_, trace) = alm::solve(p, x0, l0, cfg)?;
                    let rate = diagnostics::estimate_rate(&trace, p)?;
                    Ok(RateRow {
                        rho: cfg.rho0,
                        q_geomean: rate.q_geomean,
                        iters: trace.outer_iterations(),
                        status: trace.status,
                        sigma: trace.final_sigma(),
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("rate worker panicked")).collect()
    });
    let mut text = Vec::new();
    let mut failed = false;
    {
        let mut csv = csv::Writer::from_writer(&mut text);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        csv.write_record(["rho", "q_geomean", "iters", "status", "sigma"]).map_err(io)?;
        for r in results {
            let r = r?;
            failed |= r.status != AlmStatus::Converged;
            csv.write_record([
                r.rho.to_string(),
                r.q_geomean.to_string(),
                r.iters.to_string(),
                r.status.as_str().to_string(),
                r.sigma.to_string(),
            ])
            .map_err(io)?;
        }
        csv.flush()?;
    }
    match &a.out {
        Some(path) => std::fs::write(path, &text)?,
        None => out.write_all(&text)?,
    }
    Ok(if failed { EXIT_FAILURE } else { EXIT_OK })
}
