//! Command-line front end.
//!
//! One binary, six subcommands:
//!
//! * `plan` — run the budget-constrained design search and write the
//!   summary table (CSV) plus one full [`DesignReport`] JSON per quantile
//!   order;
//! * `simulate` — generate synthetic SSADT datasets as CSV;
//! * `fit` — maximum likelihood fit of `(a, b, beta)` to a dataset;
//! * `fisher` — the analytic information matrix and quantile variance at a
//!   fixed plan, optionally cross-checked against simulation;
//! * `sensitivity` — re-run the design search under relative parameter
//!   perturbations read from CSV;
//! * `stability` — simulate-and-refit bias/MSE study at fixed plans.
//!
//! Every command reads the same JSON configuration (schema on
//! [`Config`]) and writes its outputs atomically: content goes to a
//! temporary file in the destination directory which is renamed into
//! place, so a failed run never leaves a partial file.
//!
//! Exit codes: `0` success; `2` invalid configuration, domain, or I/O
//! problem (also command-line usage errors); `3` infeasible budget;
//! `4` numerical failure (non-finite values, an ill-conditioned
//! information matrix, or an optimizer that never converged).
//!
//! Report tables round to six significant digits; raw dataset files keep
//! full shortest-round-trip precision, so a parsed dataset reproduces the
//! simulated increments bit for bit. Worker threads come from `--threads`,
//! then the `SSADT_THREADS` environment variable, then the machine's
//! available parallelism.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::design::{
    optimize_design_with, sensitivity_study_with, stability_study, DesignOptions, DesignReport,
};
use crate::firstpassage::BsMapping;
use crate::fisher::{avar_quantile_with, fisher_info_with, AvarResult, FisherMatrix};
use crate::inference::{fit_mle, numeric_observed_information};
use crate::model::{Config, Scenario, TestPlan};
use crate::simulate::{read_dataset_csv, simulate_batch, write_dataset_csv};
use crate::{Error, Result};

/// Significant digits used in report tables.
const REPORT_DIGITS: u32 = 6;

#[derive(Debug, Parser)]
#[command(
    name = "ssadt",
    version,
    about = "Planning and analysis for step-stress accelerated degradation tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search for the budget-optimal plan; write a summary CSV and per-p JSON.
    Plan(PlanArgs),
    /// Generate synthetic SSADT datasets as CSV.
    Simulate(SimulateArgs),
    /// Fit gamma-process parameters to one dataset by maximum likelihood.
    Fit(FitArgs),
    /// Evaluate the information matrix and quantile variance at a plan.
    Fisher(FisherArgs),
    /// Re-run the design search under perturbed parameters from a CSV.
    Sensitivity(SensitivityArgs),
    /// Simulate-and-refit bias/MSE study at fixed plans from a CSV.
    Stability(StabilityArgs),
}

/// Options shared by every subcommand.
#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON configuration file (parameters, stress, costs, D, p).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output file, written atomically.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Worker threads (default: SSADT_THREADS, then available parallelism).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// First-passage parameter mapping.
    #[arg(long, value_enum, default_value_t = MappingArg::Scale)]
    bs_mapping: MappingArg,
}

/// The decision variables of one concrete plan.
#[derive(Debug, Args)]
struct PlanFlags {
    /// Number of test units.
    #[arg(long)]
    n: u32,
    /// Inter-measurement interval in time units.
    #[arg(long)]
    f: u32,
    /// Measurements per unit.
    #[arg(long)]
    m: u32,
    /// Stress elevation threshold.
    #[arg(long)]
    omega1: f64,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Quantile order, overriding the configuration's `p`.
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated quantile orders; one table row and JSON per value.
    #[arg(long, value_delimiter = ',', conflicts_with = "p")]
    p_grid: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    plan: PlanFlags,
    /// Independent replications to generate.
    #[arg(long, default_value_t = 1)]
    reps: u32,
    /// Random seed; the same seed reproduces the file byte for byte.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    plan: PlanFlags,
    /// Dataset CSV (the simulator's format) holding exactly one replication.
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
}

#[derive(Debug, Args)]
struct FisherArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    plan: PlanFlags,
    /// Quantile order, overriding the configuration's `p`.
    #[arg(long)]
    p: Option<f64>,
    /// Cross-check the analytic matrix against the mean observed
    /// information of simulated datasets.
    #[arg(long)]
    verify_fisher: bool,
    /// Replications for the verification run.
    #[arg(long, default_value_t = 2000)]
    reps: u32,
    /// Seed for the verification run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SensitivityArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Perturbation CSV with header `eps_a,eps_b,eps_beta`; each row scales
    /// the parameters to ((1+eps_a)a, (1+eps_b)b, (1+eps_beta)beta).
    #[arg(long, value_name = "PATH")]
    eps: PathBuf,
    /// Quantile order, overriding the configuration's `p`.
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Plan CSV with header `n,f,M,omega1`, one study row per plan.
    #[arg(long, value_name = "PATH")]
    plans: PathBuf,
    /// Simulated replications per plan.
    #[arg(long, default_value_t = 2000)]
    reps: u32,
    /// Random seed shared by the per-plan batches.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Command-line face of [`BsMapping`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MappingArg {
    /// Shape follows the threshold, scale follows the degradation rate.
    Scale,
    /// Reciprocal convention for both parameters.
    Rate,
}

impl From<MappingArg> for BsMapping {
    fn from(arg: MappingArg) -> Self {
        match arg {
            MappingArg::Scale => BsMapping::Scale,
            MappingArg::Rate => BsMapping::Rate,
        }
    }
}

/// Minimal logger: warnings and errors to stderr, everything else off.
struct StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::Level::Warn
    }

    fn log(&self, record: &log::Record) {
        if self.enabled(record.metadata()) {
            eprintln!("{}: {}", record.level().to_string().to_lowercase(), record.args());
        }
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

/// Runs the CLI and returns the process exit code.
pub fn run() -> i32 {
    let _ = log::set_logger(&LOGGER).map(|()| log::set_max_level(log::LevelFilter::Warn));
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Plan(args) => cmd_plan(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Fisher(args) => cmd_fisher(args),
        Command::Sensitivity(args) => cmd_sensitivity(args),
        Command::Stability(args) => cmd_stability(args),
    }
}

/// Loads and validates the configuration and applies the thread setting.
fn load_scenario(common: &CommonArgs) -> Result<Scenario> {
    configure_threads(common.threads)?;
    let text = std::fs::read_to_string(&common.config).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot read config {}: {e}", common.config.display()),
        ))
    })?;
    Config::from_json_str(&text)?.validate()
}

fn configure_threads(cli_threads: Option<usize>) -> Result<()> {
    let from_env = match std::env::var("SSADT_THREADS") {
        Ok(raw) => Some(raw.parse::<usize>().map_err(|e| {
            Error::InvalidConfig(format!("SSADT_THREADS must be a positive integer: {e}"))
        })?),
        Err(_) => None,
    };
    let Some(n) = cli_threads.or(from_env) else {
        return Ok(());
    };
    if n == 0 {
        return Err(Error::InvalidConfig("thread count must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("cannot size the thread pool: {e}")))
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// renamed into place, so readers never observe a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Rounds to `digits` significant digits and prints the shortest exact
/// decimal form of the rounded value.
fn fmt_sig(x: f64, digits: u32) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits as i32 - 1 - magnitude);
    ((x * scale).round() / scale).to_string()
}

fn validated_p(p: f64) -> Result<f64> {
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(Error::InvalidConfig(format!("quantile order p must lie in (0, 1), got {p}")))
    }
}

/// Path of the per-p JSON report next to the summary table.
fn report_json_path(out: &Path, p: f64) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}_p{p}.json"))
}

fn json_pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn cmd_plan(args: PlanArgs) -> Result<()> {
    let scenario = load_scenario(&args.common)?;
    let ps: Vec<f64> = match (&args.p_grid, args.p) {
        (Some(grid), _) => grid.clone(),
        (None, Some(p)) => vec![p],
        (None, None) => vec![scenario.p],
    };
    if ps.is_empty() {
        return Err(Error::InvalidConfig("the p grid must hold at least one value".into()));
    }
    for &p in &ps {
        validated_p(p)?;
    }
    let options =
        DesignOptions { mapping: args.common.bs_mapping.into(), ..DesignOptions::default() };
    let mut reports: Vec<DesignReport> = Vec::with_capacity(ps.len());
    for &p in &ps {
        reports.push(optimize_design_with(
            p,
            &scenario.params,
            &scenario.stress,
            &scenario.costs,
            scenario.d,
            &options,
        )?);
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "p",
        "xi_p",
        "min_cv",
        "omega1_star",
        "elev_prob_Mm1f",
        "elev_prob_Mf",
        "n",
        "f",
        "M",
    ])
    .map_err(std::io::Error::from)?;
    for r in &reports {
        w.write_record([
            r.p.to_string(),
            fmt_sig(r.xi_p_hat, REPORT_DIGITS),
            fmt_sig(r.min_cv, REPORT_DIGITS),
            fmt_sig(r.omega1_star, REPORT_DIGITS),
            fmt_sig(r.elev_prob_mm1f, REPORT_DIGITS),
            fmt_sig(r.elev_prob_mf, REPORT_DIGITS),
            r.n_star.to_string(),
            r.f_star.to_string(),
            r.m_star.to_string(),
        ])
        .map_err(std::io::Error::from)?;
    }
    let table = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;

    // Serialize everything before touching the filesystem: a failure here
    // leaves no output at all rather than a subset of the files.
    let mut json_outputs = Vec::with_capacity(reports.len());
    for r in &reports {
        json_outputs.push((report_json_path(&args.common.out, r.p), json_pretty(r)?));
    }
    for (path, bytes) in &json_outputs {
        write_atomic(path, bytes)?;
    }
    write_atomic(&args.common.out, &table)
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let scenario = load_scenario(&args.common)?;
    let plan =
        TestPlan::new(args.plan.n, args.plan.f, args.plan.m, args.plan.omega1, scenario.d)?;
    let sets = simulate_batch(&plan, &scenario.params, &scenario.stress, args.reps, args.seed)?;
    let mut buf = Vec::new();
    write_dataset_csv(&mut buf, &sets, &scenario.stress)?;
    write_atomic(&args.common.out, &buf)
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let scenario = load_scenario(&args.common)?;
    let plan =
        TestPlan::new(args.plan.n, args.plan.f, args.plan.m, args.plan.omega1, scenario.d)?;
    let raw = std::fs::read(&args.data).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot read dataset {}: {e}", args.data.display()),
        ))
    })?;
    let sets = read_dataset_csv(raw.as_slice(), &plan)?;
    let [obs] = sets.as_slice() else {
        return Err(Error::InvalidConfig(format!(
            "dataset holds {} replications; fit expects exactly one set of n units",
            sets.len()
        )));
    };
    match fit_mle(obs, &scenario.stress, &scenario.params) {
        Ok(fit) => write_atomic(&args.common.out, &json_pretty(&fit)?),
        Err(Error::OptimizationFailure { message, best_theta, best_loglik }) => {
            // The contract still reports the best point seen, but on stdout:
            // a nonzero exit never leaves an output file behind.
            let body = serde_json::json!({
                "error": message,
                "best_theta": {"a": best_theta[0], "b": best_theta[1], "beta": best_theta[2]},
                "best_loglik": best_loglik,
            });
            println!("{}", serde_json::to_string_pretty(&body).map_err(std::io::Error::other)?);
            Err(Error::OptimizationFailure { message, best_theta, best_loglik })
        }
        Err(other) => Err(other),
    }
}

/// Simulation cross-check of the analytic information matrix.
#[derive(Debug, Serialize)]
struct VerifySection {
    /// Replications simulated.
    reps: u32,
    /// Seed of the simulation batch.
    seed: u64,
    /// Finite-difference steps per component.
    steps: [f64; 3],
    /// Mean observed information over the batch.
    mc_mean: [[f64; 3]; 3],
    /// Monte Carlo standard error of each mean entry.
    mc_stderr: [[f64; 3]; 3],
    /// Largest `|analytic - mean| / stderr` over the entries.
    max_abs_z: f64,
}

/// Full output of the `fisher` subcommand.
#[derive(Debug, Serialize)]
struct FisherReport<'a> {
    fisher: &'a FisherMatrix,
    avar: &'a AvarResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    verify: Option<VerifySection>,
}

fn verify_fisher(
    plan: &TestPlan,
    scenario: &Scenario,
    reps: u32,
    seed: u64,
    analytic: &FisherMatrix,
) -> Result<VerifySection> {
    if reps < 2 {
        return Err(Error::Domain(format!(
            "the verification needs at least 2 replications, got {reps}"
        )));
    }
    let steps = [1e-3, 0.3, scenario.params.beta * 1e-3];
    let sets = simulate_batch(plan, &scenario.params, &scenario.stress, reps, seed)?;
    let infos: Vec<[[f64; 3]; 3]> = sets
        .par_iter()
        .map(|obs| numeric_observed_information(obs, &scenario.stress, &scenario.params, steps))
        .collect::<Result<_>>()?;
    let count = infos.len() as f64;
    let mut mc_mean = [[0.0; 3]; 3];
    let mut mc_stderr = [[0.0; 3]; 3];
    let mut max_abs_z: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let mean = infos.iter().map(|h| h[i][j]).sum::<f64>() / count;
            let var = infos.iter().map(|h| (h[i][j] - mean).powi(2)).sum::<f64>() / (count - 1.0);
            let stderr = (var / count).sqrt();
            let diff = analytic.entries[i][j] - mean;
            let z = if stderr > 0.0 {
                (diff / stderr).abs()
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            mc_mean[i][j] = mean;
            mc_stderr[i][j] = stderr;
            max_abs_z = max_abs_z.max(z);
        }
    }
    Ok(VerifySection { reps, seed, steps, mc_mean, mc_stderr, max_abs_z })
}

fn cmd_fisher(args: FisherArgs) -> Result<()> {
    let scenario = load_scenario(&args.common)?;
    let plan =
        TestPlan::new(args.plan.n, args.plan.f, args.plan.m, args.plan.omega1, scenario.d)?;
    let mapping: BsMapping = args.common.bs_mapping.into();
    let p = validated_p(args.p.unwrap_or(scenario.p))?;
    let fisher = fisher_info_with(&plan, &scenario.params, &scenario.stress, mapping)?;
    let avar = avar_quantile_with(&plan, &scenario.params, &scenario.stress, scenario.d, p, mapping)?;
    let verify = if args.verify_fisher {
        Some(verify_fisher(&plan, &scenario, args.reps, args.seed, &fisher)?)
    } else {
        None
    };
    let report = FisherReport { fisher: &fisher, avar: &avar, verify };
    write_atomic(&args.common.out, &json_pretty(&report)?)
}

/// Parses the perturbation CSV: header `eps_a,eps_b,eps_beta`, one
/// relative-perturbation triple per row.
fn read_eps_csv(path: &Path) -> Result<Vec<[f64; 3]>> {
    let raw = std::fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot read perturbations {}: {e}", path.display()),
        ))
    })?;
    let mut r = csv::Reader::from_reader(raw.as_slice());
    let expected = ["eps_a", "eps_b", "eps_beta"];
    let headers =
        r.headers().map_err(|e| Error::InvalidConfig(format!("perturbation header: {e}")))?;
    if headers.iter().ne(expected) {
        return Err(Error::InvalidConfig(format!(
            "perturbation header must be {:?}, got {:?}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (idx, record) in r.records().enumerate() {
        let line = idx + 2;
        let record =
            record.map_err(|e| Error::InvalidConfig(format!("perturbation line {line}: {e}")))?;
        if record.len() != 3 {
            return Err(Error::InvalidConfig(format!(
                "perturbation line {line}: expected 3 fields, got {}",
                record.len()
            )));
        }
        let mut eps = [0.0; 3];
        for (slot, field) in eps.iter_mut().zip(record.iter()) {
            *slot = field.trim().parse().map_err(|e| {
                Error::InvalidConfig(format!("perturbation line {line}: bad value {field:?}: {e}"))
            })?;
        }
        rows.push(eps);
    }
    if rows.is_empty() {
        return Err(Error::InvalidConfig("the perturbation file holds no rows".into()));
    }
    Ok(rows)
}

fn cmd_sensitivity(args: SensitivityArgs) -> Result<()> {
    let scenario = load_scenario(&args.common)?;
    let p = validated_p(args.p.unwrap_or(scenario.p))?;
    let eps_list = read_eps_csv(&args.eps)?;
    let options =
        DesignOptions { mapping: args.common.bs_mapping.into(), ..DesignOptions::default() };
    let rows = sensitivity_study_with(
        &eps_list,
        p,
        &scenario.params,
        &scenario.stress,
        &scenario.costs,
        scenario.d,
        &options,
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["eps_a", "eps_b", "eps_beta", "min_cv", "omega1_star", "n", "f", "M", "error"])
        .map_err(std::io::Error::from)?;
    for row in &rows {
        let eps: Vec<String> = row.eps.iter().map(|e| e.to_string()).collect();
        match (&row.report, &row.error) {
            (Some(report), _) => w
                .write_record([
                    eps[0].clone(),
                    eps[1].clone(),
                    eps[2].clone(),
                    fmt_sig(report.min_cv, REPORT_DIGITS),
                    fmt_sig(report.omega1_star, REPORT_DIGITS),
                    report.n_star.to_string(),
                    report.f_star.to_string(),
                    report.m_star.to_string(),
                    String::new(),
                ])
                .map_err(std::io::Error::from)?,
            (None, Some(message)) => w
                .write_record([
                    eps[0].clone(),
                    eps[1].clone(),
                    eps[2].clone(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    message.clone(),
                ])
                .map_err(std::io::Error::from)?,
            (None, None) => {
                return Err(Error::Numerical(
                    "sensitivity row carries neither report nor error".into(),
                ))
            }
        }
    }
    let table = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    write_atomic(&args.common.out, &table)
}

/// Parses the plan CSV: header `n,f,M,omega1`, one plan per row; `D` comes
/// from the configuration.
fn read_plans_csv(path: &Path, d: f64) -> Result<Vec<TestPlan>> {
    let raw = std::fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot read plans {}: {e}", path.display()),
        ))
    })?;
    let mut r = csv::Reader::from_reader(raw.as_slice());
    let expected = ["n", "f", "M", "omega1"];
    let headers = r.headers().map_err(|e| Error::InvalidConfig(format!("plan header: {e}")))?;
    if headers.iter().ne(expected) {
        return Err(Error::InvalidConfig(format!(
            "plan header must be {:?}, got {:?}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut plans = Vec::new();
    for (idx, record) in r.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::InvalidConfig(format!("plan line {line}: {e}")))?;
        if record.len() != 4 {
            return Err(Error::InvalidConfig(format!(
                "plan line {line}: expected 4 fields, got {}",
                record.len()
            )));
        }
        let parse_int = |i: usize, name: &str| -> Result<u32> {
            record[i].trim().parse().map_err(|e| {
                Error::InvalidConfig(format!("plan line {line}: bad {name} {:?}: {e}", &record[i]))
            })
        };
        let n = parse_int(0, "n")?;
        let f = parse_int(1, "f")?;
        let m = parse_int(2, "M")?;
        let omega1: f64 = record[3].trim().parse().map_err(|e| {
            Error::InvalidConfig(format!("plan line {line}: bad omega1 {:?}: {e}", &record[3]))
        })?;
        plans.push(TestPlan::new(n, f, m, omega1, d)?);
    }
    if plans.is_empty() {
        return Err(Error::InvalidConfig("the plan file holds no rows".into()));
    }
    Ok(plans)
}

fn cmd_stability(args: StabilityArgs) -> Result<()> {
    let scenario = load_scenario(&args.common)?;
    let plans = read_plans_csv(&args.plans, scenario.d)?;
    let rows = stability_study(&plans, args.reps, args.seed, &scenario.params, &scenario.stress)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "n",
        "f",
        "M",
        "omega1",
        "reps",
        "excluded",
        "bias_a",
        "mse_a",
        "bias_b",
        "mse_b",
        "bias_beta",
        "mse_beta",
    ])
    .map_err(std::io::Error::from)?;
    for row in &rows {
        w.write_record([
            row.plan.n.to_string(),
            row.plan.f.to_string(),
            row.plan.m.to_string(),
            row.plan.omega1.to_string(),
            row.reps.to_string(),
            row.excluded.to_string(),
            fmt_sig(row.bias[0], REPORT_DIGITS),
            fmt_sig(row.mse[0], REPORT_DIGITS),
            fmt_sig(row.bias[1], REPORT_DIGITS),
            fmt_sig(row.mse[1], REPORT_DIGITS),
            fmt_sig(row.bias[2], REPORT_DIGITS),
            fmt_sig(row.mse[2], REPORT_DIGITS),
        ])
        .map_err(std::io::Error::from)?;
    }
    let table = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    write_atomic(&args.common.out, &table)
}
