//! Command-line front end: workload generation, keys and signing, single
//! authorization decisions, benchmarks, anonymity reports and state files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qaebac::bench::{self, BenchConfig, BenchResult};
use qaebac::codec;
use qaebac::crypto::{keygen, sign_credential, KeyPair};
use qaebac::engine::{Engine, EngineConfig, Variant};
use qaebac::ewpt::MatchMode;
use qaebac::model::store::{load, read_ledger, read_population, snapshot};
use qaebac::model::{AccessRequest, AttributeSpace, Credential, Ledger, PolicyRule, Registry};
use qaebac::workload::{
    all_cases, case_spec, generate_with, read_workload, write_workload, CredentialSize, GenOptions, Workload,
    DEFAULT_SEED, DEFAULT_TARGET_MATCH_RATE,
};

#[derive(Parser)]
#[command(name = "qaebac", version, about = "Anonymity-aware attribute-based access control toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an attribute space and write an empty state file.
    Init {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a benchmark workload directory.
    Gen {
        #[arg(long)]
        case: String,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, default_value_t = 0.01)]
        scale: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TARGET_MATCH_RATE)]
        target_match_rate: f64,
        #[arg(long, value_enum, default_value_t = CredSize::Uniform)]
        credential_size: CredSize,
    },
    /// Create an Ed25519 key pair as JSON.
    Keygen {
        /// 32-byte seed, base64; random when omitted.
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sign a credential; with --object, emit a full access request.
    Sign {
        #[arg(long)]
        key: PathBuf,
        /// Attribute assignment `name=value`; repeatable.
        #[arg(long = "attr", value_name = "NAME=VALUE", required = true)]
        attrs: Vec<String>,
        #[arg(long)]
        object: Option<String>,
        #[arg(long)]
        op: Option<String>,
        #[arg(long, default_value_t = 1)]
        seq: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide one request against a workload's population and policies.
    Authz {
        #[arg(long)]
        workload: PathBuf,
        #[arg(long)]
        request: PathBuf,
        /// Prior decision history (JSON Lines).
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = VariantArg::Full)]
        variant: VariantArg,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Replay generated workloads through engine variants and report metrics.
    Bench {
        /// Case name (C1..C15) or `all`; repeatable.
        #[arg(long, required = true)]
        case: Vec<String>,
        /// Variant or `all`; repeatable.
        #[arg(long, value_enum, default_values_t = [VariantArg::All])]
        variant: Vec<VariantArg>,
        #[arg(long, default_value_t = bench::DEFAULT_RUNS)]
        runs: usize,
        #[arg(long, default_value_t = 0.01)]
        scale: f64,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Use the pipelined replay (amortized latency only).
        #[arg(long)]
        parallel: bool,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Anonymity statistics per credential size, as CSV.
    Report {
        /// Case name (C1..C15) or `all`; repeatable.
        #[arg(long, required = true)]
        case: Vec<String>,
        #[arg(long, default_value_t = 0.01)]
        scale: f64,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a workload's stream and save population plus history.
    Snapshot {
        #[arg(long)]
        workload: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Load a state file and print a summary.
    Load {
        #[arg(long)]
        state: PathBuf,
    },
}

#[derive(Args)]
struct SeedArg {
    #[arg(long, env = "QAE_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct EngineArgs {
    /// Minimum request entropy in bits.
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Strict)]
    mode: ModeArg,
    /// Decisions between weight recomputations.
    #[arg(long, default_value_t = 1000)]
    update_interval: usize,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        EngineConfig {
            threshold: self.threshold,
            mode: match self.mode {
                ModeArg::Strict => MatchMode::Strict,
                ModeArg::Subset => MatchMode::Subset,
            },
            update_interval: self.update_interval,
            ..EngineConfig::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Subset,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum VariantArg {
    Full,
    Static,
    Linear,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum CredSize {
    Uniform,
    Full,
}

fn variants(args: &[VariantArg]) -> Vec<Variant> {
    let mut out = Vec::new();
    for a in args {
        let vs: &[Variant] = match a {
            VariantArg::Full => &[Variant::Full],
            VariantArg::Static => &[Variant::Static],
            VariantArg::Linear => &[Variant::Linear],
            VariantArg::All => &Variant::ALL,
        };
        for v in vs {
            if !out.contains(v) {
                out.push(*v);
            }
        }
    }
    out
}

fn cases(args: &[String]) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for a in args {
        let names: Vec<String> = if a == "all" {
            all_cases().into_iter().map(|c| c.name).collect()
        } else {
            vec![case_spec(a)?.name]
        };
        for n in names {
            if !out.contains(&n) {
                out.push(n);
            }
        }
    }
    Ok(out)
}

fn emit(out: Option<&Path>, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn read_key(path: &Path) -> Result<KeyPair> {
    let v: Value = serde_json::from_str(&fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)?;
    let seed = v["secret_seed"].as_str().context("key file lacks secret_seed")?;
    Ok(KeyPair::from_seed(&codec::decode_array::<32>(seed)?))
}

fn load_population(dir: &Path) -> Result<(Registry, Vec<PolicyRule>)> {
    let space = AttributeSpace::from_json(&fs::read_to_string(dir.join("space.json"))?)?;
    let registry = read_population(&dir.join("population.jsonl"), Arc::new(space))?;
    let policies = serde_json::from_str(&fs::read_to_string(dir.join("policies.json"))?)?;
    Ok((registry, policies))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Init { space, out } => {
            let space = AttributeSpace::from_json(&fs::read_to_string(&space)?)?;
            let attrs = space.len();
            snapshot(&out, &Registry::new(Arc::new(space)), &Ledger::new())?;
            emit(None, &json!({ "attributes": attrs, "state": out }))?;
        }
        Command::Gen { case, seed, scale, out, target_match_rate, credential_size } => {
            let options = GenOptions {
                target_match_rate,
                credential_size: match credential_size {
                    CredSize::Uniform => CredentialSize::Uniform,
                    CredSize::Full => CredentialSize::Full,
                },
            };
            let w = generate_with(&case_spec(&case)?, seed.seed, scale, options)?;
            write_workload(&out, &w)?;
            emit(None, &serde_json::to_value(&w.manifest)?)?;
        }
        Command::Keygen { seed, out } => {
            let key = match seed {
                Some(s) => keygen(Some(&codec::decode_array::<32>(&s)?))?,
                None => keygen(None)?,
            };
            let value = json!({
                "public_key": key.public_key(),
                "secret_seed": codec::encode(&key.secret_seed()),
            });
            emit(out.as_deref(), &value)?;
        }
        Command::Sign { key, attrs, object, op, seq, out } => {
            let key = read_key(&key)?;
            let mut credential = Credential::new();
            for a in &attrs {
                let Some((name, value)) = a.split_once('=') else {
                    bail!("attribute `{a}` is not NAME=VALUE");
                };
                credential.insert(name, value);
            }
            let sc = sign_credential(&key, &credential)?;
            let value = match object {
                Some(object_id) => serde_json::to_value(AccessRequest {
                    seq,
                    signed_credential: sc,
                    object_id,
                    op,
                    env: Default::default(),
                })?,
                None => serde_json::to_value(sc)?,
            };
            emit(out.as_deref(), &value)?;
        }
        Command::Authz { workload, request, history, variant, engine } => {
            let variant = match variant {
                VariantArg::Full => Variant::Full,
                VariantArg::Static => Variant::Static,
                VariantArg::Linear => Variant::Linear,
                VariantArg::All => bail!("authz needs a single variant"),
            };
            let (registry, policies) = load_population(&workload)?;
            let ledger = match history {
                Some(p) => read_ledger(&p)?,
                None => Ledger::new(),
            };
            let req: AccessRequest = serde_json::from_str(&fs::read_to_string(&request)?)
                .with_context(|| format!("parsing request {}", request.display()))?;
            let engine = Engine::new(registry, ledger, policies, variant, engine.config())?;
            let decision = engine.authorize(&req);
            emit(None, &serde_json::to_value(decision.log_line(variant))?)?;
        }
        Command::Bench { case, variant, runs, scale, seed, csv, parallel, engine } => {
            let config = BenchConfig { engine: engine.config(), runs, seed: seed.seed, scale, parallel };
            let mut rows: Vec<BenchResult> = Vec::new();
            for name in cases(&case)? {
                let w = qaebac::workload::generate(&case_spec(&name)?, seed.seed, scale)?;
                for v in variants(&variant) {
                    let results = bench::run_workload(&w, v, &config)?;
                    let mean = results.last().expect("aggregate row");
                    eprintln!(
                        "{name} {v}: {:.0} tps, avg {:.4} ms, p99 {:.4} ms, {:.2} comparisons, grant rate {:.3}",
                        mean.throughput_tps, mean.latency_avg_ms, mean.latency_p99_ms, mean.comparisons_avg, mean.grant_rate
                    );
                    rows.extend(results);
                }
            }
            match csv {
                Some(path) => bench::export_bench_csv(&path, &rows)?,
                None => print!("{}", bench::bench_csv(&rows)),
            }
        }
        Command::Report { case, scale, seed, out } => {
            let mut rows = Vec::new();
            for name in cases(&case)? {
                let w = qaebac::workload::generate(&case_spec(&name)?, seed.seed, scale)?;
                rows.extend(bench::anonymity_report(&w)?);
            }
            bench::export_anonymity_csv(&out, &rows)?;
            emit(None, &json!({ "rows": rows.len(), "out": out }))?;
        }
        Command::Snapshot { workload, out, engine } => {
            let w: Workload = read_workload(&workload)?;
            let mut e = Engine::new(w.registry, Ledger::new(), w.policies, Variant::Full, engine.config())?;
            e.replay(&w.requests, true)?;
            let (registry, ledger) = e.into_parts();
            snapshot(&out, &registry, &ledger)?;
            emit(None, &json!({ "subjects": registry.subject_count(), "history": ledger.len(), "state": out }))?;
        }
        Command::Load { state } => {
            let (registry, ledger) = load(&state)?;
            emit(
                None,
                &json!({
                    "attributes": registry.space().len(),
                    "subjects": registry.subject_count(),
                    "objects": registry.object_count(),
                    "history": ledger.len(),
                    "last_seq": ledger.last_seq(),
                }),
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
