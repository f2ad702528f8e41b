//! Monte Carlo harness for rejection rates of the treatment tests.
//!
//! Each scenario is one cell of the simulation grid. A replication draws a
//! dataset from the calibrated ZIP generator, fits every model and records,
//! for each of the seven tests, whether the treatment coefficient was
//! rejected. Replication `r` of scenario `s` always uses
//! `RngStream(base_seed, s.index, r)`, so results do not depend on how the work
//! is scheduled.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{solve_gamma2_with, GeneratorParams, ZeroRateReference};
use crate::distributions::{sample_bernoulli, sample_poisson, sample_std_normal, QuadratureRule, RngStream};
use crate::error::{Error, Result};
use crate::models::{default_start, fit_model, fit_model_from, wald_test, Dataset, FitFlag, FitResult, ModelKind};

pub const TABLE_NS: [usize; 4] = [100, 200, 300, 500];
pub const TABLE_ZERO_RATES: [f64; 7] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_REPLICATIONS: usize = 1000;
/// Scenarios whose failure fraction on any test exceeds this are flagged.
pub const FAILURE_FLAG_FRACTION: f64 = 0.02;

const JITTER: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    C1,
    C2,
    C3,
    C4,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Condition::C1, Condition::C2, Condition::C3, Condition::C4];

    /// Count-part treatment effects studied under this condition.
    pub fn beta1_values(self) -> &'static [f64] {
        match self {
            Condition::C1 | Condition::C2 => &[-0.1, -0.2, -0.3],
            Condition::C3 | Condition::C4 => &[0.0],
        }
    }

    /// Zero-part treatment effect.
    pub fn gamma1(self) -> f64 {
        match self {
            Condition::C1 | Condition::C3 => 0.5,
            Condition::C2 | Condition::C4 => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::C1 => "C1",
            Condition::C2 => "C2",
            Condition::C3 => "C3",
            Condition::C4 => "C4",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown condition '{s}'")))
    }
}

/// The seven hypothesis tests, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestName {
    PoissonB1,
    NbB1,
    ZipB1,
    ZipG1,
    MzipB1,
    LinearRawB1,
    LinearLogB1,
}

impl TestName {
    pub const ALL: [TestName; 7] = [
        TestName::PoissonB1,
        TestName::NbB1,
        TestName::ZipB1,
        TestName::ZipG1,
        TestName::MzipB1,
        TestName::LinearRawB1,
        TestName::LinearLogB1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestName::PoissonB1 => "poisson_b1",
            TestName::NbB1 => "nb_b1",
            TestName::ZipB1 => "zip_b1",
            TestName::ZipG1 => "zip_g1",
            TestName::MzipB1 => "mzip_b1",
            TestName::LinearRawB1 => "linear_raw_b1",
            TestName::LinearLogB1 => "linear_log_b1",
        }
    }

    pub fn model(self) -> ModelKind {
        match self {
            TestName::PoissonB1 => ModelKind::Poisson,
            TestName::NbB1 => ModelKind::NB,
            TestName::ZipB1 | TestName::ZipG1 => ModelKind::ZIP,
            TestName::MzipB1 => ModelKind::MZIP,
            TestName::LinearRawB1 => ModelKind::LinearRaw,
            TestName::LinearLogB1 => ModelKind::LinearLog,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TestName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Schema(format!("unknown test_name '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestOutcome {
    Reject,
    Accept,
    FitFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    /// Position in the full default grid; also the RNG stream id.
    pub index: usize,
    pub condition: Condition,
    pub n: usize,
    pub zero_rate: f64,
    pub generator: GeneratorParams,
    pub alpha: f64,
    pub replications: usize,
}

/// Which cells of the grid to build.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSelection {
    pub conditions: Vec<Condition>,
    /// Restricts conditions 1 and 2 to these count effects; `None` keeps all.
    pub beta1: Option<Vec<f64>>,
    pub ns: Vec<usize>,
    pub zero_rates: Vec<f64>,
    pub alpha: f64,
    pub replications: usize,
    pub reference: ZeroRateReference,
}

impl Default for GridSelection {
    fn default() -> Self {
        Self {
            conditions: Condition::ALL.to_vec(),
            beta1: None,
            ns: TABLE_NS.to_vec(),
            zero_rates: TABLE_ZERO_RATES.to_vec(),
            alpha: DEFAULT_ALPHA,
            replications: DEFAULT_REPLICATIONS,
            reference: ZeroRateReference::Marginal,
        }
    }
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// Scenarios in grid order: condition, then `b1` as listed for the condition,
/// then `n`, then zero rate.
pub fn build_grid(sel: &GridSelection, rule: &QuadratureRule) -> Result<Vec<ScenarioConfig>> {
    for &n in &sel.ns {
        if !TABLE_NS.contains(&n) {
            return Err(Error::Config(format!("n = {n} is not one of {TABLE_NS:?}")));
        }
    }
    for &r in &sel.zero_rates {
        if !TABLE_ZERO_RATES.iter().any(|&t| same(t, r)) {
            return Err(Error::Config(format!("zero rate {r} is not one of {TABLE_ZERO_RATES:?}")));
        }
    }
    if let Some(b) = &sel.beta1 {
        for &v in b {
            if !Condition::ALL.iter().any(|c| c.beta1_values().iter().any(|&t| same(t, v))) {
                return Err(Error::Config(format!("beta1 = {v} does not belong to any condition")));
            }
        }
    }
    if !(sel.alpha > 0.0 && sel.alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {}", sel.alpha)));
    }
    if sel.replications == 0 {
        return Err(Error::Config("replications must be at least 1".into()));
    }

    let mut out = Vec::new();
    let mut index = 0;
    for condition in Condition::ALL {
        for &beta1 in condition.beta1_values() {
            for n in TABLE_NS {
                for zero_rate in TABLE_ZERO_RATES {
                    let here = index;
                    index += 1;
                    let wanted = sel.conditions.contains(&condition)
                        && (condition.beta1_values().len() == 1
                            || sel.beta1.as_ref().is_none_or(|b| b.iter().any(|&v| same(v, beta1))))
                        && sel.ns.contains(&n)
                        && sel.zero_rates.iter().any(|&r| same(r, zero_rate));
                    if !wanted {
                        continue;
                    }
                    let generator = solve_gamma2_with(zero_rate, beta1, condition.gamma1(), rule, sel.reference)
                        .map_err(|e| Error::Scenario {
                            cell: format!("{condition} beta1={beta1} n={n} zero_rate={zero_rate}"),
                            source: Box::new(e),
                        })?;
                    out.push(ScenarioConfig {
                        index: here,
                        condition,
                        n,
                        zero_rate,
                        generator,
                        alpha: sel.alpha,
                        replications: sel.replications,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Draws `n` rows: `A ~ Bernoulli(1/2)`, `C ~ N(0, 1)`, then a structural zero
/// with probability `pi` or a Poisson(`mu`) count. Design is `[1, A, C]`.
pub fn generate_dataset(g: &GeneratorParams, n: usize, stream: &mut RngStream) -> Dataset {
    generate_with_flags(g, n, stream).0
}

/// [`generate_dataset`] that also returns which rows are structural zeros.
pub fn generate_with_flags(g: &GeneratorParams, n: usize, stream: &mut RngStream) -> (Dataset, Vec<bool>) {
    let mut y = Vec::with_capacity(n);
    let mut arm = Vec::with_capacity(n);
    let mut cov = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    for _ in 0..n {
        let a = u8::from(sample_bernoulli(stream, 0.5).expect("valid probability"));
        let c = sample_std_normal(stream);
        let pred = g.at(f64::from(a), c);
        let pi = pred.structural_zero_prob.unwrap_or(0.0);
        let mu = pred.poisson_mean.unwrap_or(0.0);
        let structural = sample_bernoulli(stream, pi).unwrap_or(false);
        let count = if structural { 0 } else { sample_poisson(stream, mu).unwrap_or(0) };
        y.push(count);
        arm.push(a);
        cov.push(c);
        flags.push(structural);
    }
    let d = Dataset::with_covariates(y, &arm, &[cov], &["cov"]).expect("generated design is valid");
    (d, flags)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    /// Indexed like [`TestName::ALL`].
    pub outcomes: [TestOutcome; 7],
    pub zeros: usize,
    pub n: usize,
    pub key: u64,
    pub stream_id: u64,
    pub substream_id: u64,
}

impl ReplicationRecord {
    pub fn outcome(&self, test: TestName) -> TestOutcome {
        self.outcomes[test.index()]
    }
}

fn jittered(start: &[f64], rng: &mut RngStream) -> Vec<f64> {
    start.iter().map(|&s| s * (1.0 + JITTER * (2.0 * rng.uniform() - 1.0))).collect()
}

fn needs_retry(fit: &Result<FitResult>) -> bool {
    match fit {
        Ok(f) => !f.converged && !f.has_flag(FitFlag::BoundaryZeroPart),
        Err(_) => true,
    }
}

/// Fits `kind`, retrying once from a jittered start if the first attempt fails.
fn fit_with_retry(kind: ModelKind, d: &Dataset, rng: &mut RngStream) -> Result<FitResult> {
    let first = fit_model(kind, d);
    if !needs_retry(&first) {
        return first;
    }
    match default_start(kind, d) {
        Some(start) => {
            let second = fit_model_from(kind, d, &jittered(&start, rng));
            if needs_retry(&second) && first.is_ok() { first } else { second }
        }
        None => first,
    }
}

fn outcome(fit: &Result<FitResult>, name: Option<&str>, alpha: f64) -> TestOutcome {
    let (Ok(fit), Some(name)) = (fit, name) else {
        return TestOutcome::FitFailed;
    };
    match wald_test(fit, name, alpha) {
        Ok(r) if r.reject => TestOutcome::Reject,
        Ok(_) => TestOutcome::Accept,
        Err(_) => TestOutcome::FitFailed,
    }
}

/// Runs all seven tests on one dataset. Jittered retries draw from `rng`.
pub fn run_replication_with(d: &Dataset, alpha: f64, rng: &mut RngStream) -> ReplicationRecord {
    let mut outcomes = [TestOutcome::FitFailed; 7];
    for kind in [
        ModelKind::Poisson,
        ModelKind::NB,
        ModelKind::ZIP,
        ModelKind::MZIP,
        ModelKind::LinearRaw,
        ModelKind::LinearLog,
    ] {
        let fit = fit_with_retry(kind, d, rng);
        for test in TestName::ALL.into_iter().filter(|t| t.model() == kind) {
            let name = fit.as_ref().ok().and_then(|f| match test {
                TestName::ZipG1 => f.zero_treatment_name(),
                _ => f.treatment_name(),
            });
            outcomes[test.index()] = outcome(&fit, name, alpha);
        }
    }
    ReplicationRecord {
        outcomes,
        zeros: d.zero_count(),
        n: d.n(),
        key: rng.key(),
        stream_id: rng.stream_id(),
        substream_id: rng.substream_id(),
    }
}

/// [`run_replication_with`] with a fixed stream for the retry jitter.
pub fn run_replication(d: &Dataset, alpha: f64) -> ReplicationRecord {
    run_replication_with(d, alpha, &mut RngStream::new(0, 0, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSummary {
    pub test: TestName,
    pub rejections: usize,
    pub acceptances: usize,
    pub failures: usize,
    /// Rejections over replications that did not fail; NaN if all failed.
    pub rejection_rate: f64,
    /// Failure fraction above [`FAILURE_FLAG_FRACTION`].
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub scenario: ScenarioConfig,
    pub base_seed: u64,
    pub tests: Vec<TestSummary>,
    pub replications_completed: usize,
    /// Pooled fraction of zero outcomes over all generated rows.
    pub zero_fraction: f64,
}

impl ScenarioResult {
    pub fn test(&self, name: TestName) -> &TestSummary {
        &self.tests[name.index()]
    }

    pub fn rejection_rate(&self, name: TestName) -> f64 {
        self.test(name).rejection_rate
    }

    pub fn flagged(&self) -> bool {
        self.tests.iter().any(|t| t.flagged)
    }
}

/// Order-insensitive reduction of replication records.
pub fn aggregate(scenario: &ScenarioConfig, base_seed: u64, records: &[ReplicationRecord]) -> ScenarioResult {
    let reps = records.len();
    let tests = TestName::ALL
        .into_iter()
        .map(|test| {
            let count = |o: TestOutcome| records.iter().filter(|r| r.outcome(test) == o).count();
            let rejections = count(TestOutcome::Reject);
            let acceptances = count(TestOutcome::Accept);
            let failures = count(TestOutcome::FitFailed);
            let usable = rejections + acceptances;
            TestSummary {
                test,
                rejections,
                acceptances,
                failures,
                rejection_rate: if usable == 0 { f64::NAN } else { rejections as f64 / usable as f64 },
                flagged: reps > 0 && failures as f64 / reps as f64 > FAILURE_FLAG_FRACTION,
            }
        })
        .collect();
    let zeros: usize = records.iter().map(|r| r.zeros).sum();
    let rows: usize = records.iter().map(|r| r.n).sum();
    ScenarioResult {
        scenario: scenario.clone(),
        base_seed,
        tests,
        replications_completed: reps,
        zero_fraction: if rows == 0 { f64::NAN } else { zeros as f64 / rows as f64 },
    }
}

/// Runs one replication of `s` on its own stream.
pub fn replicate(s: &ScenarioConfig, base_seed: u64, replication: usize) -> ReplicationRecord {
    let mut stream = RngStream::new(base_seed, s.index as u64, replication as u64);
    let d = generate_dataset(&s.generator, s.n, &mut stream);
    run_replication_with(&d, s.alpha, &mut stream)
}

/// All replications of `s`, in parallel on the current rayon pool.
pub fn run_scenario(s: &ScenarioConfig, base_seed: u64) -> ScenarioResult {
    let records: Vec<ReplicationRecord> =
        (0..s.replications).into_par_iter().map(|r| replicate(s, base_seed, r)).collect();
    aggregate(s, base_seed, &records)
}

/// Runs every scenario; `progress` is called once per finished scenario with
/// the number finished so far.
pub fn run_grid<P>(scenarios: &[ScenarioConfig], base_seed: u64, progress: P) -> Vec<ScenarioResult>
where
    P: Fn(usize, &ScenarioResult) + Sync,
{
    let done = std::sync::atomic::AtomicUsize::new(0);
    scenarios
        .par_iter()
        .map(|s| {
            let result = run_scenario(s, base_seed);
            let k = done.fetch_add(1, std::sync::atomic::Ordering::SeqCst) + 1;
            progress(k, &result);
            result
        })
        .collect()
}
