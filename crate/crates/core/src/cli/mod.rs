//! Command-line surface: `bound`, `verify`, `sample` and `sweep`.
//!
//! Exit codes: 0 on success, 1 when a verification row fails, 2 on invalid
//! input. JSON output is one record per line; CSV output has a header row
//! and writes reals with 17 significant digits.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounded::e_inf_bounds;
use crate::dist::{DistSpec, RngStream};
use crate::lab::reports::bernoulli_truth;
use crate::lab::{run_suite, Suite, SuiteConfig};
use crate::moment::{u_star_detail, MomentInstance, MomentOrder, QCase};

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "MAXINEQ_SEED";

#[derive(Debug, Parser)]
#[command(name = "maxineq", version, about = "Bounds on the expected sup-norm of averages of independent random vectors")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the upper and lower bounds for one instance.
    Bound {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a named verification suite.
    Verify {
        /// lemmas, sandwich-inf, tails-q, monotonicity or mq
        #[arg(long)]
        suite: String,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Draw vectors from one of the built-in laws.
    Sample {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, env = SEED_ENV, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Tabulate bounds and the exact (or simulated) truth over a grid.
    Sweep {
        #[command(flatten)]
        instance: InstanceArgs,
        /// NAME=START:STOP:COUNT[:log] with NAME in n, p, sigma, B, q; at most two
        #[arg(long = "grid", required = true)]
        grids: Vec<String>,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub p: u64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long = "B")]
    pub b: f64,
    /// moment order, a real ≥ 2 or `inf`
    #[arg(long, default_value = "inf")]
    pub q: String,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct LawArgs {
    #[arg(long, value_enum)]
    pub dist: DistKind,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long = "B")]
    pub b: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    /// dimension of each vector
    #[arg(long, default_value_t = 1)]
    pub p: u64,
    /// truncation level for the product law
    #[arg(long)]
    pub truncate: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 20_000)]
    pub reps: u64,
    #[arg(long, env = SEED_ENV, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// write to this file instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistKind {
    TwoPoint,
    BernoulliWorst,
    HeavyTailG,
    ProductH,
}

/// Failure with its exit code and a one-line diagnostic.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

fn usage(message: impl ToString) -> CliError {
    CliError {
        code: 2,
        message: message.to_string(),
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        usage(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError {
            code: 2,
            message: format!("output error: {e}"),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError {
            code: 2,
            message: format!("output error: {e}"),
        }
    }
}

/// The record printed by `bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRecord {
    pub upper: f64,
    pub lower: Option<f64>,
    pub regime: String,
    #[serde(rename = "A")]
    pub a: Option<f64>,
    pub correction: Option<f64>,
    pub modulo_constant: bool,
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: u64,
    pub p: u64,
    pub sigma: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub q: MomentOrder,
    pub upper: f64,
    pub lower: f64,
    pub truth: f64,
    pub truth_se: f64,
}

/// Reals in CSV: 17 significant digits, '.' decimal point.
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

fn instance_from(args: &InstanceArgs) -> Result<MomentInstance, CliError> {
    let q = MomentOrder::parse(&args.q)?;
    Ok(MomentInstance::new(args.n, args.p, args.sigma, args.b, q)?)
}

/// Bound record for an instance; q = ∞ gives the bounded-envelope record.
pub fn bound_record(inst: &MomentInstance) -> crate::Result<BoundRecord> {
    match inst.q {
        MomentOrder::Infinite => {
            let r = e_inf_bounds(&inst.bounded())?;
            Ok(BoundRecord {
                upper: r.upper,
                lower: Some(r.lower),
                regime: format!("{:?}", r.regime),
                a: Some(r.a),
                correction: Some(r.correction),
                modulo_constant: false,
            })
        }
        MomentOrder::Finite(_) => {
            let u = u_star_detail(inst)?;
            let regime = match u.case {
                Some(QCase::Case1) => "Case1",
                Some(QCase::Case2) => "Case2",
                None => "Bounded",
            };
            Ok(BoundRecord {
                upper: u.value,
                lower: None,
                regime: regime.into(),
                a: None,
                correction: None,
                modulo_constant: u.modulo_constant,
            })
        }
    }
}

/// A parsed `NAME=START:STOP:COUNT[:log]` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub name: String,
    pub values: Vec<f64>,
}

const GRID_NAMES: [&str; 5] = ["n", "p", "sigma", "B", "q"];

pub fn parse_grid(spec: &str) -> Result<Grid, CliError> {
    let bad = || usage(format!("malformed grid '{spec}', expected NAME=START:STOP:COUNT[:log]"));
    let (name, range) = spec.split_once('=').ok_or_else(bad)?;
    if !GRID_NAMES.contains(&name) {
        return Err(usage(format!("unknown grid parameter '{name}', expected one of n, p, sigma, B, q")));
    }
    let parts: Vec<&str> = range.split(':').collect();
    if !(parts.len() == 3 || (parts.len() == 4 && parts[3] == "log")) {
        return Err(bad());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if count == 0 {
        return Err(usage(format!("empty grid '{spec}'")));
    }
    if !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    let log = parts.len() == 4;
    if log && !(start > 0.0 && stop > 0.0) {
        return Err(usage(format!("log grid '{spec}' needs positive endpoints")));
    }
    let values = (0..count)
        .map(|i| {
            let t = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
            if log {
                (start.ln() + (stop.ln() - start.ln()) * t).exp()
            } else {
                start + (stop - start) * t
            }
        })
        .collect();
    Ok(Grid {
        name: name.to_string(),
        values,
    })
}

fn apply(args: &mut InstanceArgs, name: &str, v: f64) -> Result<(), CliError> {
    let count = |v: f64| {
        let r = v.round();
        if r >= 1.0 && r < 2f64.powi(53) {
            Ok(r as u64)
        } else {
            Err(usage(format!("grid value {v} for {name} is not a positive count")))
        }
    };
    match name {
        "n" => args.n = count(v)?,
        "p" => args.p = count(v)?,
        "sigma" => args.sigma = v,
        "B" => args.b = v,
        _ => args.q = format!("{v}"),
    }
    Ok(())
}

/// Grid points in row-major order (last grid varies fastest).
pub fn sweep_instances(base: &InstanceArgs, grids: &[Grid]) -> Result<Vec<MomentInstance>, CliError> {
    if grids.is_empty() || grids.len() > 2 {
        return Err(usage("sweep takes one or two --grid options"));
    }
    if grids.len() == 2 && grids[0].name == grids[1].name {
        return Err(usage(format!("parameter '{}' swept twice", grids[0].name)));
    }
    let mut out = Vec::new();
    let inner: &[f64] = grids.get(1).map(|g| g.values.as_slice()).unwrap_or(&[f64::NAN]);
    for &a in &grids[0].values {
        for &b in inner {
            let mut args = base.clone();
            apply(&mut args, &grids[0].name, a)?;
            if let Some(g) = grids.get(1) {
                apply(&mut args, &g.name, b)?;
            }
            out.push(instance_from(&args)?);
        }
    }
    Ok(out)
}

pub fn sweep_rows(instances: &[MomentInstance], run: &RunArgs) -> Result<Vec<SweepRow>, CliError> {
    instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let bounded = inst.bounded();
            let bounds = e_inf_bounds(&bounded)?;
            let upper = match inst.q {
                MomentOrder::Infinite => bounds.upper,
                MomentOrder::Finite(_) => u_star_detail(inst)?.value,
            };
            let (truth, truth_se) = bernoulli_truth(&bounded, run.reps, RngStream::new(run.seed, i as u64), run.workers)?;
            Ok(SweepRow {
                n: inst.n,
                p: inst.p,
                sigma: inst.sigma,
                b: inst.b,
                q: inst.q,
                upper,
                lower: bounds.lower,
                truth,
                truth_se,
            })
        })
        .collect()
}

fn dist_spec(law: &LawArgs) -> Result<DistSpec, CliError> {
    let LawArgs { dist, tau, k, sigma, b, q, p, truncate } = *law;
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| usage(format!("--dist {dist:?} needs --{flag}")));
    let spec = match dist {
        DistKind::TwoPoint => DistSpec::TwoPoint {
            tau: need(tau, "tau")?,
            k: need(k, "k")?,
        },
        DistKind::BernoulliWorst => DistSpec::BernoulliWorst {
            sigma: need(sigma, "sigma")?,
            b: need(b, "B")?,
        },
        DistKind::HeavyTailG => DistSpec::HeavyTailG { q: need(q, "q")? },
        DistKind::ProductH => match (tau, k) {
            (Some(tau), Some(k)) => DistSpec::ProductH {
                q: need(q, "q")?,
                tau,
                k,
                p,
                truncate,
            },
            _ => {
                let mut s = DistSpec::product_h_for_envelope(need(sigma, "sigma")?, need(b, "B")?, need(q, "q")?, p)?;
                if let DistSpec::ProductH { truncate: t, .. } = &mut s {
                    *t = truncate;
                }
                s
            }
        },
    };
    spec.validate()?;
    Ok(spec)
}

fn open_output<'a>(path: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| usage(format!("cannot create {}: {e}", p.display())))?)),
        None => Box::new(stdout),
    })
}

fn write_json_lines<T: Serialize>(out: &mut dyn Write, rows: &[T]) -> Result<(), CliError> {
    for r in rows {
        serde_json::to_writer(&mut *out, r).map_err(|e| usage(format!("output error: {e}")))?;
        writeln!(out)?;
    }
    Ok(())
}

fn write_csv(out: &mut dyn Write, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn execute(config: RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    match config.command {
        Command::Bound { instance, output } => {
            let rec = bound_record(&instance_from(&instance)?)?;
            let mut out = open_output(&output.output, stdout)?;
            match output.format.unwrap_or(Format::Json) {
                Format::Json => write_json_lines(&mut *out, &[rec])?,
                Format::Csv => write_csv(
                    &mut *out,
                    &["upper", "lower", "regime", "A", "correction", "modulo_constant"],
                    vec![vec![fmt_real(rec.upper), fmt_opt(rec.lower), rec.regime, fmt_opt(rec.a), fmt_opt(rec.correction), rec.modulo_constant.to_string()]],
                )?,
            }
            out.flush()?;
            Ok(0)
        }
        Command::Verify { suite, run, output } => {
            let suite: Suite = suite.parse().map_err(|_| usage(format!("unknown suite '{suite}', expected one of lemmas, sandwich-inf, tails-q, monotonicity, mq")))?;
            if run.reps == 0 || run.workers == 0 {
                return Err(usage("--reps and --workers must be at least 1"));
            }
            let rows = run_suite(
                suite,
                &SuiteConfig {
                    reps: run.reps,
                    seed: run.seed,
                    workers: run.workers,
                },
            )?;
            let failed = rows.iter().filter(|r| !r.ok).count();
            let mut out = open_output(&output.output, stdout)?;
            match output.format.unwrap_or(Format::Json) {
                Format::Json => write_json_lines(&mut *out, &rows)?,
                Format::Csv => write_csv(
                    &mut *out,
                    &["suite", "check", "observed", "lower", "upper", "ok"],
                    rows.iter()
                        .map(|r| vec![r.suite.clone(), r.check.clone(), fmt_real(r.observed), fmt_opt(r.lower), fmt_opt(r.upper), r.ok.to_string()])
                        .collect(),
                )?,
            }
            out.flush()?;
            writeln!(stderr, "{suite}: {} rows, {failed} failed", rows.len())?;
            Ok(if failed == 0 { 0 } else { 1 })
        }
        Command::Sample { law, count, seed, output } => {
            let spec = dist_spec(&law)?;
            let dim = spec.fixed_dim().unwrap_or(law.p);
            let draws = crate::dist::sample_vectors(&spec, dim, RngStream::new(seed, 0), count)?;
            let mut out = open_output(&output.output, stdout)?;
            match output.format.unwrap_or(Format::Json) {
                Format::Json => {
                    for d in &draws {
                        serde_json::to_writer(&mut *out, &serde_json::json!({ "x": d })).map_err(|e| usage(format!("output error: {e}")))?;
                        writeln!(out)?;
                    }
                }
                Format::Csv => {
                    let header: Vec<String> = (1..=dim).map(|j| format!("x{j}")).collect();
                    let header: Vec<&str> = header.iter().map(String::as_str).collect();
                    write_csv(&mut *out, &header, draws.iter().map(|d| d.iter().map(|&x| fmt_real(x)).collect()).collect())?;
                }
            }
            out.flush()?;
            Ok(0)
        }
        Command::Sweep { instance, grids, run, output } => {
            let grids = grids.iter().map(|g| parse_grid(g)).collect::<Result<Vec<_>, _>>()?;
            if run.workers == 0 {
                return Err(usage("--workers must be at least 1"));
            }
            let rows = sweep_rows(&sweep_instances(&instance, &grids)?, &run)?;
            let mut out = open_output(&output.output, stdout)?;
            match output.format.unwrap_or(Format::Csv) {
                Format::Json => write_json_lines(&mut *out, &rows)?,
                Format::Csv => write_csv(
                    &mut *out,
                    &["n", "p", "sigma", "B", "q", "upper", "lower", "truth", "truth_se"],
                    rows.iter()
                        .map(|r| {
                            vec![
                                r.n.to_string(),
                                r.p.to_string(),
                                fmt_real(r.sigma),
                                fmt_real(r.b),
                                fmt_real(r.q.value()),
                                fmt_real(r.upper),
                                fmt_real(r.lower),
                                fmt_real(r.truth),
                                fmt_real(r.truth_se),
                            ]
                        })
                        .collect(),
                )?,
            }
            out.flush()?;
            Ok(0)
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Diagnostics go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    match execute(config, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}
