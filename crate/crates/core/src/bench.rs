//! Benchmark runs over generated workloads and CSV export.
//!
//! Latency is decision-only and in-process: each measured interval covers
//! verification, the anonymity check, matching and recording of one request.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::anonymity::{construct_subject_space, request_entropy, rt_anonymity, SubjectAnonymityTable};
use crate::engine::{Decision, Engine, EngineConfig, Variant};
use crate::error::{Error, Result};
use crate::model::{Credential, Ledger, Outcome};
use crate::workload::{case_spec, generate, Workload};

/// Fraction of each stream excluded from latency statistics.
pub const WARMUP_FRACTION: f64 = 0.05;
pub const DEFAULT_RUNS: usize = 10;

pub const BENCH_HEADER: &str =
    "case,variant,run,throughput_tps,latency_avg_ms,latency_p50_ms,latency_p99_ms,comparisons_avg,grant_rate";
pub const ANONYMITY_HEADER: &str =
    "case,t,r,cohort_size,e_req_min,e_req_mean,e_req_max,a_sub_q1,a_sub_median,a_sub_q3";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunLabel {
    Index(usize),
    Mean,
}

impl fmt::Display for RunLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunLabel::Index(i) => write!(f, "{i}"),
            RunLabel::Mean => f.write_str("mean"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub case: String,
    pub variant: Variant,
    pub run: RunLabel,
    pub throughput_tps: f64,
    pub latency_avg_ms: f64,
    pub latency_p50_ms: f64,
    pub latency_p99_ms: f64,
    pub comparisons_avg: f64,
    pub grant_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub engine: EngineConfig,
    pub runs: usize,
    pub seed: u64,
    pub scale: f64,
    /// Replay through the parallel pipeline. Per-decision latencies are then
    /// not observable and every latency column reports the amortized mean.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            engine: EngineConfig::default(),
            runs: DEFAULT_RUNS,
            seed: crate::workload::DEFAULT_SEED,
            scale: 0.01,
            parallel: false,
        }
    }
}

/// Outcome of one replay: metrics plus the decisions themselves.
pub struct RunOutput {
    pub result: BenchResult,
    pub decisions: Vec<Decision>,
}

/// Replays the workload's stream through a fresh engine.
pub fn run_once(
    workload: &Workload,
    variant: Variant,
    config: &BenchConfig,
    run: usize,
) -> Result<RunOutput> {
    let requests = &workload.requests;
    if requests.is_empty() {
        return Err(Error::EmptyStream);
    }
    let mut engine = Engine::new(
        workload.registry.clone(),
        Ledger::new(),
        workload.policies.clone(),
        variant,
        config.engine.clone(),
    )?;
    let n = requests.len();
    let skip = (n as f64 * WARMUP_FRACTION).floor() as usize;
    let (decisions, elapsed, mut latencies) = if config.parallel {
        let start = Instant::now();
        let decisions = engine.replay(requests, true)?;
        let elapsed = start.elapsed().as_secs_f64();
        let per = elapsed * 1e3 / n as f64;
        (decisions, elapsed, vec![per; n - skip])
    } else {
        let mut decisions = Vec::with_capacity(n);
        let mut latencies = Vec::with_capacity(n - skip);
        let start = Instant::now();
        for (i, req) in requests.iter().enumerate() {
            let t0 = Instant::now();
            decisions.push(engine.submit(req)?);
            let ms = t0.elapsed().as_secs_f64() * 1e3;
            if i >= skip {
                latencies.push(ms);
            }
        }
        (decisions, start.elapsed().as_secs_f64(), latencies)
    };
    latencies.sort_by(f64::total_cmp);
    let comparisons: u64 = decisions.iter().map(|d| u64::from(d.comparisons)).sum();
    let grants = decisions.iter().filter(|d| d.outcome == Outcome::Grant).count();
    let result = BenchResult {
        case: workload.spec().name.clone(),
        variant,
        run: RunLabel::Index(run),
        throughput_tps: n as f64 / elapsed.max(f64::MIN_POSITIVE),
        latency_avg_ms: latencies.iter().sum::<f64>() / latencies.len() as f64,
        latency_p50_ms: percentile(&latencies, 0.50),
        latency_p99_ms: percentile(&latencies, 0.99),
        comparisons_avg: comparisons as f64 / n as f64,
        grant_rate: grants as f64 / n as f64,
    };
    Ok(RunOutput { result, decisions })
}

/// Nearest-rank percentile of an ascending sample.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Runs `config.runs` replays of a generated workload, followed by the mean row.
pub fn run_case(case: &str, variant: Variant, config: &BenchConfig) -> Result<Vec<BenchResult>> {
    let spec = case_spec(case)?;
    let workload = generate(&spec, config.seed, config.scale)?;
    run_workload(&workload, variant, config)
}

pub fn run_workload(workload: &Workload, variant: Variant, config: &BenchConfig) -> Result<Vec<BenchResult>> {
    if config.runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    let mut results = Vec::with_capacity(config.runs + 1);
    for run in 0..config.runs {
        results.push(run_once(workload, variant, config, run)?.result);
    }
    results.push(aggregate(&results)?);
    Ok(results)
}

/// Arithmetic mean of per-run rows.
pub fn aggregate(results: &[BenchResult]) -> Result<BenchResult> {
    let first = results.first().ok_or(Error::EmptyStream)?;
    let n = results.len() as f64;
    let mean = |f: fn(&BenchResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    Ok(BenchResult {
        case: first.case.clone(),
        variant: first.variant,
        run: RunLabel::Mean,
        throughput_tps: mean(|r| r.throughput_tps),
        latency_avg_ms: mean(|r| r.latency_avg_ms),
        latency_p50_ms: mean(|r| r.latency_p50_ms),
        latency_p99_ms: mean(|r| r.latency_p99_ms),
        comparisons_avg: mean(|r| r.comparisons_avg),
        grant_rate: mean(|r| r.grant_rate),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnonymityRow {
    pub case: String,
    pub t: usize,
    pub r: usize,
    pub cohort_size: usize,
    pub e_req_min: f64,
    pub e_req_mean: f64,
    pub e_req_max: f64,
    pub a_sub_q1: f64,
    pub a_sub_median: f64,
    pub a_sub_q3: f64,
}

/// Per-t anonymity statistics for a workload. History comes from replaying
/// the workload's own stream, so usage weights reflect the generated traffic.
pub fn anonymity_report(workload: &Workload) -> Result<Vec<AnonymityRow>> {
    let registry = &workload.registry;
    if registry.subject_count() == 0 {
        return Err(Error::EmptyPopulation);
    }
    let mut engine = Engine::new(
        registry.clone(),
        Ledger::new(),
        workload.policies.clone(),
        Variant::Static,
        EngineConfig::default(),
    )?;
    engine.replay(&workload.requests, true)?;
    let ledger = engine.ledger();
    let matrix = registry.matrix();
    let table = SubjectAnonymityTable::build(matrix, ledger);
    let max_len = (0..matrix.subject_count() as u32)
        .map(|s| matrix.row(s).len())
        .max()
        .unwrap_or(0);
    let mut rows = Vec::new();
    for t in 1..=max_len {
        let rt = match rt_anonymity(matrix, t) {
            Ok(rt) => rt,
            Err(Error::EmptyCohort(_)) => continue,
            Err(e) => return Err(e),
        };
        let credentials = credentials_of_size(workload, t);
        let entropies: Vec<f64> = crate::par::map(&credentials, |c| {
            request_entropy(&construct_subject_space(c, matrix, ledger))
        });
        let mut scores: Vec<f64> = rt
            .cohort
            .iter()
            .map(|&s| table.score(matrix.row(s).len()))
            .collect();
        scores.sort_by(f64::total_cmp);
        rows.push(AnonymityRow {
            case: workload.spec().name.clone(),
            t,
            r: rt.r,
            cohort_size: rt.cohort.len(),
            e_req_min: entropies.iter().copied().fold(f64::INFINITY, f64::min),
            e_req_mean: entropies.iter().sum::<f64>() / entropies.len() as f64,
            e_req_max: entropies.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            a_sub_q1: quantile(&scores, 0.25),
            a_sub_median: quantile(&scores, 0.5),
            a_sub_q3: quantile(&scores, 0.75),
        });
    }
    Ok(rows)
}

/// Distinct credentials of exactly `t` pairs that some subject can present.
fn credentials_of_size(workload: &Workload, t: usize) -> Vec<Credential> {
    let mut out = BTreeSet::new();
    for subject in workload.registry.subjects() {
        let pairs: Vec<(&String, &String)> = subject.pairs.iter().collect();
        for_each_combination(pairs.len(), t, |idx| {
            out.insert(idx.iter().map(|&i| (pairs[i].0.as_str(), pairs[i].1.as_str())).collect());
        });
    }
    out.into_iter().collect()
}

fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Linear-interpolated quantile of an ascending sample.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => 0.0,
        1 => sorted[0],
        n => {
            let pos = q * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

pub fn bench_csv(results: &[BenchResult]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.case,
            r.variant,
            r.run,
            r.throughput_tps,
            r.latency_avg_ms,
            r.latency_p50_ms,
            r.latency_p99_ms,
            r.comparisons_avg,
            r.grant_rate
        ));
    }
    out
}

/// Rows are emitted sorted by (case number, t).
pub fn anonymity_csv(rows: &[AnonymityRow]) -> String {
    let mut sorted: Vec<&AnonymityRow> = rows.iter().collect();
    sorted.sort_by_key(|r| (case_number(&r.case), r.case.clone(), r.t));
    let mut out = String::from(ANONYMITY_HEADER);
    out.push('\n');
    for r in sorted {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.case,
            r.t,
            r.r,
            r.cohort_size,
            r.e_req_min,
            r.e_req_mean,
            r.e_req_max,
            r.a_sub_q1,
            r.a_sub_median,
            r.a_sub_q3
        ));
    }
    out
}

fn case_number(name: &str) -> usize {
    name.strip_prefix('C').and_then(|n| n.parse().ok()).unwrap_or(usize::MAX)
}

pub fn export_bench_csv(path: &Path, results: &[BenchResult]) -> Result<()> {
    fs::write(path, bench_csv(results))?;
    Ok(())
}

pub fn export_anonymity_csv(path: &Path, rows: &[AnonymityRow]) -> Result<()> {
    fs::write(path, anonymity_csv(rows))?;
    Ok(())
}
