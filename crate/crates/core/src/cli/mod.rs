//! Command-line front end: `fit`, `calibrate`, `simulate` and `report`.
//!
//! Each command is a plain function taking its parsed arguments and an output
//! sink, so the binary stays a thin dispatcher and tests can drive the
//! commands directly.

mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::calibration::{solve_gamma2_with, GeneratorParams, ZeroRateReference};
use crate::distributions::QuadratureRule;
use crate::error::{Error, Result};
use crate::harness::{
    build_grid, run_grid, Condition, GridSelection, ScenarioResult, TestName, DEFAULT_ALPHA, DEFAULT_REPLICATIONS,
    TABLE_NS, TABLE_ZERO_RATES,
};
use crate::models::{effect_summaries, fit_model, wald_test, Dataset, FitFlag, FitResult, ModelKind};

pub use svg::render_condition;

/// Base seed used when neither the config nor `--seed` gives one.
pub const DEFAULT_SEED: u64 = 20_240_601;

pub const RESULTS_HEADER: [&str; 10] = [
    "condition",
    "beta1",
    "gamma1",
    "n",
    "zero_rate",
    "test_name",
    "rejection_rate",
    "failures",
    "replications",
    "seed",
];

/// Process exit codes, one per error family.
pub mod exit {
    pub const OK: i32 = 0;
    /// Bad command-line usage (reported by the argument parser).
    pub const USAGE: i32 = 2;
    /// Malformed data file, unknown column, or non-integer outcome.
    pub const INPUT: i32 = 3;
    /// Invalid run configuration.
    pub const CONFIG: i32 = 4;
    /// Requested zero rate cannot be reached by the generator.
    pub const UNREACHABLE: i32 = 5;
    /// Model fit failed (non-convergence, singular information, overflow).
    pub const FIT: i32 = 6;
    /// Fit stopped on a boundary (e.g. no zeros for a zero-inflated model).
    pub const BOUNDARY: i32 = 7;
    /// Results file is missing a required column or has a bad value.
    pub const SCHEMA: i32 = 8;
    /// Results file has no data rows.
    pub const EMPTY: i32 = 9;
    /// File system or serialization failure.
    pub const IO: i32 = 10;
}

pub const EXIT_CODE_HELP: &str = "\
Exit codes:
  0   success
  2   usage error
  3   input error (malformed data, unknown column, non-integer outcome)
  4   invalid configuration
  5   unreachable zero rate
  6   model fit failed
  7   fit on a boundary (e.g. zero-inflated model on data without zeros)
  8   results schema error
  9   empty results file
  10  I/O or serialization error";

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Input { .. } => exit::INPUT,
        Error::Config(_) => exit::CONFIG,
        Error::UnreachableZeroRate { .. } => exit::UNREACHABLE,
        Error::Scenario { source, .. } => match **source {
            Error::UnreachableZeroRate { .. } => exit::UNREACHABLE,
            _ => exit::CONFIG,
        },
        Error::Domain(_) => exit::CONFIG,
        Error::NonFiniteObjective(_) | Error::NonConvergence(_) | Error::SingularInformation(_) => exit::FIT,
        Error::Boundary(_) => exit::BOUNDARY,
        Error::Schema(_) => exit::SCHEMA,
        Error::EmptyResults(_) => exit::EMPTY,
        // The csv crate reports unparsable files as its own error type.
        Error::Csv(e) if !e.is_io_error() => exit::INPUT,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => exit::IO,
    }
}

#[derive(Debug, Parser)]
#[command(name = "zicount", version, about = "Count regression and zero-inflation power simulations", after_help = EXIT_CODE_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model to a CSV file and print a coefficient table.
    #[command(after_help = EXIT_CODE_HELP)]
    Fit(FitArgs),
    /// Solve the generator's gamma2 for a target zero rate.
    #[command(after_help = EXIT_CODE_HELP)]
    Calibrate(CalibrateArgs),
    /// Run the simulation grid and write results.csv.
    #[command(after_help = EXIT_CODE_HELP)]
    Simulate(SimulateArgs),
    /// Draw one SVG figure per condition from results.csv.
    #[command(after_help = EXIT_CODE_HELP)]
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// linear-raw, linear-log, poisson, nb, zip or mzip.
    #[arg(long)]
    pub model: ModelKind,
    #[arg(long)]
    pub outcome: String,
    /// 0/1 treatment column; omit for an intercept-only fit.
    #[arg(long)]
    pub treatment: Option<String>,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Where to write the JSON fit report.
    #[arg(long, default_value = "fit.json")]
    pub json: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub zero_rate: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub beta1: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma1: f64,
    /// Population the zero rate refers to: marginal or control.
    #[arg(long, default_value = "marginal", value_parser = parse_reference)]
    pub reference: ZeroRateReference,
}

fn parse_reference(s: &str) -> std::result::Result<ZeroRateReference, String> {
    match s {
        "marginal" => Ok(ZeroRateReference::Marginal),
        "control" => Ok(ZeroRateReference::Control),
        _ => Err(format!("expected 'marginal' or 'control', got '{s}'")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// JSON run configuration; every field is optional.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the config value or all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Simulation settings. Missing fields take the full-grid defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub conditions: Vec<Condition>,
    /// Restricts conditions 1 and 2 to these count effects.
    pub beta1: Option<Vec<f64>>,
    pub ns: Vec<usize>,
    pub zero_rates: Vec<f64>,
    pub replications: usize,
    pub alpha: f64,
    pub base_seed: u64,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub zero_rate_reference: ZeroRateReference,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            conditions: Condition::ALL.to_vec(),
            beta1: None,
            ns: TABLE_NS.to_vec(),
            zero_rates: TABLE_ZERO_RATES.to_vec(),
            replications: DEFAULT_REPLICATIONS,
            alpha: DEFAULT_ALPHA,
            base_seed: DEFAULT_SEED,
            threads: None,
            out_dir: None,
            zero_rate_reference: ZeroRateReference::Marginal,
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn selection(&self) -> GridSelection {
        GridSelection {
            conditions: self.conditions.clone(),
            beta1: self.beta1.clone(),
            ns: self.ns.clone(),
            zero_rates: self.zero_rates.clone(),
            alpha: self.alpha,
            replications: self.replications,
            reference: self.zero_rate_reference,
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a, out).map(|_| ()),
        Command::Calibrate(a) => cmd_calibrate(&a, out).map(|_| ()),
        Command::Simulate(a) => cmd_simulate(&a).map(|_| ()),
        Command::Report(a) => cmd_report(&a).map(|_| ()),
    }
}

#[derive(Debug, Serialize)]
struct CoefficientRow {
    name: String,
    estimate: f64,
    std_error: Option<f64>,
    statistic: Option<f64>,
    p_value: Option<f64>,
    reject: Option<bool>,
}

#[derive(Debug, Serialize)]
struct FitReport<'a> {
    data: &'a Path,
    alpha: f64,
    fit: &'a FitResult,
    coefficients: Vec<CoefficientRow>,
    effects: Vec<crate::models::EffectSummary>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.6}"))
}

/// Fits a model, prints the report to `out` and writes it as JSON.
///
/// A zero-inflated fit on data without zeros is still reported and written,
/// then returned as a [`Error::Boundary`] so the caller exits nonzero.
pub fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> Result<FitResult> {
    let data = Dataset::from_csv(&args.data, &args.outcome, args.treatment.as_deref(), &args.covariates)?;
    let fit = fit_model(args.model, &data)?;
    let boundary = fit.has_flag(FitFlag::BoundaryZeroPart);
    if !fit.converged && !boundary {
        return Err(Error::NonConvergence(format!(
            "{} fit stopped after {} iterations with gradient norm {:.3e}",
            fit.model_kind, fit.iterations, fit.gradient_norm
        )));
    }

    let statistic_label = match args.model {
        ModelKind::LinearRaw | ModelKind::LinearLog => "t",
        _ => "z",
    };
    let mut rows = Vec::new();
    for (i, name) in fit.names.iter().enumerate() {
        let report = wald_test(&fit, name, args.alpha).ok();
        rows.push(CoefficientRow {
            name: name.clone(),
            estimate: fit.coefficients[i],
            std_error: report.as_ref().map(|r| r.std_error),
            statistic: report.as_ref().map(|r| r.z),
            p_value: report.as_ref().map(|r| r.p_value),
            reject: report.as_ref().map(|r| r.reject),
        });
    }
    let effects = effect_summaries(&fit);

    writeln!(out, "model: {}   n = {}   alpha = {}", fit.model_kind, fit.n_obs, args.alpha)?;
    writeln!(
        out,
        "{:<24} {:>12} {:>12} {:>10} {:>10}",
        "parameter", "estimate", "std.error", statistic_label, "p"
    )?;
    for r in &rows {
        writeln!(
            out,
            "{:<24} {:>12.6} {:>12} {:>10} {:>10}",
            r.name,
            r.estimate,
            fmt_opt(r.std_error),
            r.statistic.map_or_else(|| "NA".into(), |x| format!("{x:.3}")),
            r.p_value.map_or_else(|| "NA".into(), |x| format!("{x:.4}")),
        )?;
    }
    writeln!(out, "loglik: {:.6}", fit.loglik)?;
    for e in &effects {
        writeln!(out, "{:?}: {:.6}", e.kind, e.value)?;
    }
    if boundary {
        writeln!(
            out,
            "BoundaryZeroPart: no zero outcomes; the zero-part intercept diverges and only the count block is reported"
        )?;
    }

    let report = FitReport { data: &args.data, alpha: args.alpha, fit: &fit, coefficients: rows, effects };
    fs::write(&args.json, serde_json::to_string_pretty(&report)?)?;

    if boundary {
        return Err(Error::Boundary(
            "BoundaryZeroPart: data contain no zeros, so the zero-inflation part has no finite estimate".into(),
        ));
    }
    Ok(fit)
}

/// Solves the generator and prints it as JSON.
pub fn cmd_calibrate(args: &CalibrateArgs, out: &mut dyn Write) -> Result<GeneratorParams> {
    let params =
        solve_gamma2_with(args.zero_rate, args.beta1, args.gamma1, &QuadratureRule::default(), args.reference)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&params)?)?;
    Ok(params)
}

/// Formats a float so that equal values always print identically.
fn num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

/// One CSV row per scenario and test, stable-sorted by
/// (condition, beta1, n, zero_rate, test_name).
pub fn results_rows(results: &[ScenarioResult]) -> Vec<[String; 10]> {
    let mut keyed = Vec::new();
    for r in results {
        let s = &r.scenario;
        for t in &r.tests {
            keyed.push((
                (s.condition, s.generator.beta1, s.n, s.zero_rate, t.test.as_str()),
                [
                    s.condition.to_string(),
                    num(s.generator.beta1),
                    num(s.generator.gamma1),
                    s.n.to_string(),
                    num(s.zero_rate),
                    t.test.to_string(),
                    num(t.rejection_rate),
                    t.failures.to_string(),
                    r.replications_completed.to_string(),
                    r.base_seed.to_string(),
                ],
            ));
        }
    }
    keyed.sort_by(|(a, _), (b, _)| {
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.total_cmp(&b.3))
            .then(a.4.cmp(b.4))
    });
    keyed.into_iter().map(|(_, row)| row).collect()
}

pub fn write_results_csv(path: &Path, results: &[ScenarioResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for row in results_rows(results) {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ScenarioFile<'a> {
    #[serde(flatten)]
    result: &'a ScenarioResult,
    flagged: bool,
}

/// Runs the configured grid and writes `results.csv` plus
/// `scenarios/scenario_<index>.json` under the output directory.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<ScenarioResult>> {
    let mut config = match &args.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    if let Some(t) = args.threads {
        config.threads = Some(t);
    }
    if let Some(o) = &args.out {
        config.out_dir = Some(o.clone());
    }
    let out_dir = config
        .out_dir
        .clone()
        .ok_or_else(|| Error::Config("no output directory: pass --out or set out_dir".into()))?;
    if config.threads == Some(0) {
        return Err(Error::Config("threads must be at least 1".into()));
    }

    // Every cell is calibrated before any replication runs.
    let scenarios = build_grid(&config.selection(), &QuadratureRule::default())?;
    fs::create_dir_all(out_dir.join("scenarios"))?;

    let total = scenarios.len();
    let progress = |k: usize, r: &ScenarioResult| {
        let s = &r.scenario;
        let flag = if r.flagged() { "  [flagged: fit failures above 2%]" } else { "" };
        eprintln!(
            "[{k}/{total}] {} beta1={} n={} zero_rate={}{flag}",
            s.condition, s.generator.beta1, s.n, s.zero_rate
        );
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = config.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results = pool.install(|| run_grid(&scenarios, config.base_seed, progress));

    write_results_csv(&out_dir.join("results.csv"), &results)?;
    for r in &results {
        let file = ScenarioFile { result: r, flagged: r.flagged() };
        fs::write(
            out_dir.join("scenarios").join(format!("scenario_{:03}.json", r.scenario.index)),
            serde_json::to_string_pretty(&file)?,
        )?;
    }
    Ok(results)
}

/// One row of results.csv as read back by the report.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub condition: Condition,
    pub beta1: f64,
    pub gamma1: f64,
    pub n: usize,
    pub zero_rate: f64,
    pub test: TestName,
    pub rejection_rate: f64,
    pub failures: usize,
    pub replications: usize,
    pub seed: u64,
}

fn parse_field<T: std::str::FromStr>(raw: &str, column: &str, line: usize) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::Schema(format!("line {line}, column '{column}': cannot parse '{raw}'")))
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(Error::EmptyResults(path.display().to_string())),
    };
    let mut idx = BTreeMap::new();
    for col in RESULTS_HEADER {
        let pos = header
            .iter()
            .position(|h| h.trim() == col)
            .ok_or_else(|| Error::Schema(format!("missing column '{col}'")))?;
        idx.insert(col, pos);
    }
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let line = i + 2;
        let get = |col: &str| rec.get(idx[col]).unwrap_or("");
        let condition = get("condition")
            .trim()
            .parse::<Condition>()
            .map_err(|_| Error::Schema(format!("line {line}, column 'condition': '{}'", get("condition"))))?;
        rows.push(ResultRow {
            condition,
            beta1: parse_field(get("beta1"), "beta1", line)?,
            gamma1: parse_field(get("gamma1"), "gamma1", line)?,
            n: parse_field(get("n"), "n", line)?,
            zero_rate: parse_field(get("zero_rate"), "zero_rate", line)?,
            test: get("test_name")
                .trim()
                .parse()
                .map_err(|_| Error::Schema(format!("line {line}, column 'test_name': '{}'", get("test_name"))))?,
            rejection_rate: parse_field(get("rejection_rate"), "rejection_rate", line)?,
            failures: parse_field(get("failures"), "failures", line)?,
            replications: parse_field(get("replications"), "replications", line)?,
            seed: parse_field(get("seed"), "seed", line)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyResults(path.display().to_string()));
    }
    Ok(rows)
}

/// Writes `condition_<C>.svg` for every condition present; returns the paths.
pub fn cmd_report(args: &ReportArgs) -> Result<Vec<PathBuf>> {
    let rows = read_results_csv(&args.results)?;
    fs::create_dir_all(&args.out)?;
    let mut by_condition: BTreeMap<Condition, Vec<ResultRow>> = BTreeMap::new();
    for r in rows {
        by_condition.entry(r.condition).or_default().push(r);
    }
    let mut written = Vec::new();
    for (condition, rows) in &by_condition {
        let path = args.out.join(format!("condition_{condition}.svg"));
        fs::write(&path, render_condition(*condition, rows))?;
        written.push(path);
    }
    Ok(written)
}
