//! Seeded synthetic workloads for the fifteen benchmark cases.
//!
//! A case fixes population sizes, stream length, policy count, domain size
//! and attribute counts. Generation scales the counts down for desk-scale
//! runs, draws a uniform population, signs one credential per request, and
//! samples policies whose specificity is tuned so that a target fraction of
//! the stream matches some rule under subset semantics.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::crypto::{keygen, sign_credential, KeyPair, SignedCredential};
use crate::engine::request_pair_ids;
use crate::error::{Error, Result};
use crate::ewpt::{CompiledPolicies, PathOutcome, Semantics};
use crate::model::store::{read_population, write_population};
use crate::model::{
    AccessRequest, AttrClass, AttributeDef, AttributeSpace, AvPair, Credential, PolicyRule, Registry,
};

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_TARGET_MATCH_RATE: f64 = 0.5;
pub const OPERATIONS: [&str; 2] = ["read", "write"];

const MIN_SUBJECTS: usize = 10;
const MIN_OBJECTS: usize = 10;
const MIN_POLICIES: usize = 5;
const MIN_REQUESTS: usize = 100;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub name: String,
    pub n_subjects: usize,
    pub n_objects: usize,
    pub n_requests: usize,
    pub n_policies: usize,
    pub value_range: usize,
    pub n_subject_attrs: usize,
    pub n_object_attrs: usize,
}

const TABLE: [(usize, usize, usize, usize, usize, usize, usize); 15] = [
    (5_000, 10_000, 1_000_000, 100, 4, 4, 2),
    (10_000, 10_000, 1_000_000, 100, 4, 4, 2),
    (15_000, 10_000, 1_000_000, 100, 4, 4, 2),
    (10_000, 5_000, 1_000_000, 100, 4, 4, 2),
    (10_000, 15_000, 1_000_000, 100, 4, 4, 2),
    (10_000, 10_000, 500_000, 100, 4, 4, 2),
    (10_000, 10_000, 1_500_000, 100, 4, 4, 2),
    (10_000, 10_000, 1_000_000, 50, 4, 4, 2),
    (10_000, 10_000, 1_000_000, 150, 4, 4, 2),
    (10_000, 10_000, 1_000_000, 100, 2, 4, 2),
    (10_000, 10_000, 1_000_000, 100, 6, 4, 2),
    (15_000, 10_000, 1_000_000, 100, 4, 5, 2),
    (15_000, 10_000, 1_000_000, 100, 4, 3, 2),
    (10_000, 10_000, 1_000_000, 100, 2, 4, 4),
    (10_000, 10_000, 1_000_000, 100, 2, 4, 3),
];

/// Cases grouped by the factor they vary.
pub const FACTOR_GROUPS: [(&str, [&str; 3]); 7] = [
    ("subject-quantity", ["C1", "C2", "C3"]),
    ("object-quantity", ["C2", "C4", "C5"]),
    ("request-quantity", ["C2", "C6", "C7"]),
    ("policy-quantity", ["C2", "C8", "C9"]),
    ("value-range", ["C2", "C10", "C11"]),
    ("subject-attributes", ["C3", "C12", "C13"]),
    ("object-attributes", ["C10", "C14", "C15"]),
];

pub fn case_spec(name: &str) -> Result<CaseSpec> {
    let index: usize = name
        .strip_prefix('C')
        .and_then(|n| n.parse().ok())
        .filter(|n| (1..=TABLE.len()).contains(n))
        .ok_or_else(|| Error::UnknownCase(name.to_string()))?;
    let (s, o, r, p, v, sa, oa) = TABLE[index - 1];
    Ok(CaseSpec {
        name: format!("C{index}"),
        n_subjects: s,
        n_objects: o,
        n_requests: r,
        n_policies: p,
        value_range: v,
        n_subject_attrs: sa,
        n_object_attrs: oa,
    })
}

pub fn all_cases() -> Vec<CaseSpec> {
    (1..=TABLE.len())
        .map(|i| case_spec(&format!("C{i}")).expect("table row"))
        .collect()
}

impl CaseSpec {
    fn validate(&self) -> Result<()> {
        let counts = [
            self.n_subjects,
            self.n_objects,
            self.n_requests,
            self.n_policies,
            self.value_range,
            self.n_subject_attrs,
            self.n_object_attrs,
        ];
        if counts.contains(&0) {
            return Err(Error::InvalidArgument(format!("case {} has a zero count", self.name)));
        }
        Ok(())
    }

    /// Counts after scaling and applying the lower guards.
    pub fn scaled(&self, scale: f64) -> Result<ScaledCounts> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(Error::Scale(scale));
        }
        let s = |n: usize, min: usize| ((n as f64 * scale).round() as usize).max(min);
        Ok(ScaledCounts {
            subjects: s(self.n_subjects, MIN_SUBJECTS),
            objects: s(self.n_objects, MIN_OBJECTS),
            policies: s(self.n_policies, MIN_POLICIES),
            requests: s(self.n_requests, MIN_REQUESTS),
        })
    }

    pub fn subject_attr(i: usize) -> String {
        format!("subj{i}")
    }

    pub fn object_attr(i: usize) -> String {
        format!("obj{i}")
    }

    /// Subject and object attributes over `v0..v{range-1}`, plus `op`.
    pub fn space(&self) -> Result<AttributeSpace> {
        let values: Vec<String> = (0..self.value_range).map(|v| format!("v{v}")).collect();
        let mut defs = Vec::new();
        for i in 0..self.n_subject_attrs {
            defs.push(AttributeDef::new(Self::subject_attr(i), AttrClass::Subject, 1.0, values.clone()));
        }
        for i in 0..self.n_object_attrs {
            defs.push(AttributeDef::new(Self::object_attr(i), AttrClass::Object, 1.0, values.clone()));
        }
        defs.push(AttributeDef::new("op", AttrClass::Operation, 1.0, OPERATIONS));
        AttributeSpace::new(defs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaledCounts {
    pub subjects: usize,
    pub objects: usize,
    pub policies: usize,
    pub requests: usize,
}

/// How many of a subject's attributes a request discloses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CredentialSize {
    /// Uniform over `1..=|s|`.
    #[default]
    Uniform,
    /// Always every attribute.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenOptions {
    pub target_match_rate: f64,
    pub credential_size: CredentialSize,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            target_match_rate: DEFAULT_TARGET_MATCH_RATE,
            credential_size: CredentialSize::Uniform,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub case: String,
    pub spec: CaseSpec,
    pub seed: u64,
    pub scale: f64,
    pub options: GenOptions,
    pub counts: ScaledCounts,
    /// Non-operation constraints per generated rule.
    pub rule_size: usize,
    /// Fraction of the stream matching some rule under subset semantics.
    pub match_rate: f64,
}

pub struct Workload {
    pub manifest: Manifest,
    pub registry: Registry,
    pub policies: Vec<PolicyRule>,
    pub requests: Vec<AccessRequest>,
}

impl Workload {
    pub fn spec(&self) -> &CaseSpec {
        &self.manifest.spec
    }

    pub fn space(&self) -> &Arc<AttributeSpace> {
        self.registry.space()
    }
}

pub fn generate(spec: &CaseSpec, seed: u64, scale: f64) -> Result<Workload> {
    generate_with(spec, seed, scale, GenOptions::default())
}

pub fn generate_with(spec: &CaseSpec, seed: u64, scale: f64, options: GenOptions) -> Result<Workload> {
    spec.validate()?;
    let counts = spec.scaled(scale)?;
    if !(0.0..=1.0).contains(&options.target_match_rate) {
        return Err(Error::InvalidArgument(format!(
            "target match rate {} outside [0, 1]",
            options.target_match_rate
        )));
    }
    let space = Arc::new(spec.space()?);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let value = |rng: &mut ChaCha20Rng| format!("v{}", rng.gen_range(0..spec.value_range));

    let mut registry = Registry::new(space.clone());
    let mut keys = Vec::with_capacity(counts.subjects);
    for _ in 0..counts.subjects {
        let pairs: Vec<AvPair> = (0..spec.n_subject_attrs)
            .map(|i| AvPair::new(CaseSpec::subject_attr(i), value(&mut rng)))
            .collect();
        let key = keygen(Some(&rng.gen::<[u8; 32]>()))?;
        registry.register_subject(&pairs, key.public_key())?;
        keys.push(key);
    }
    for n in 0..counts.objects {
        let pairs: Vec<AvPair> = (0..spec.n_object_attrs)
            .map(|i| AvPair::new(CaseSpec::object_attr(i), value(&mut rng)))
            .collect();
        registry.register_object(format!("o{n}"), &pairs)?;
    }

    let requests = generate_requests(&registry, &keys, counts.requests, options, &mut rng)?;

    // One candidate policy set per rule size; keep the one whose subset
    // match rate is closest to the target (ties go to the more specific).
    let policy_seed: u64 = rng.gen();
    let max_size = spec.n_subject_attrs + spec.n_object_attrs;
    let pair_sets: Vec<Vec<_>> = requests
        .iter()
        .map(|r| request_pair_ids(r, &registry))
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, usize, Vec<PolicyRule>, f64)> = None;
    for size in 1..=max_size {
        let mut prng = ChaCha20Rng::seed_from_u64(policy_seed ^ size as u64);
        let policies = generate_policies(spec, &registry, counts.policies, size, &mut prng);
        let compiled = CompiledPolicies::compile(&policies, &space)?;
        let matched = pair_sets
            .iter()
            .filter(|p| compiled.scan(p, Semantics::Subset).outcome == PathOutcome::Matched)
            .count();
        let rate = matched as f64 / pair_sets.len() as f64;
        let gap = (rate - options.target_match_rate).abs();
        if best.as_ref().is_none_or(|b| gap <= b.0) {
            best = Some((gap, size, policies, rate));
        }
    }
    let (_, rule_size, policies, match_rate) = best.expect("at least one rule size");

    Ok(Workload {
        manifest: Manifest {
            case: spec.name.clone(),
            spec: spec.clone(),
            seed,
            scale,
            options,
            counts,
            rule_size,
            match_rate,
        },
        registry,
        policies,
        requests,
    })
}

fn generate_requests(
    registry: &Registry,
    keys: &[KeyPair],
    n: usize,
    options: GenOptions,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<AccessRequest>> {
    let mut signed: HashMap<(usize, Credential), SignedCredential> = HashMap::new();
    let mut requests = Vec::with_capacity(n);
    for seq in 1..=n as u64 {
        let s = rng.gen_range(0..registry.subject_count());
        let subject = &registry.subjects()[s];
        let mut names: Vec<&String> = subject.pairs.keys().collect();
        let size = match options.credential_size {
            CredentialSize::Uniform => rng.gen_range(1..=names.len()),
            CredentialSize::Full => names.len(),
        };
        names.shuffle(rng);
        let credential: Credential = names[..size]
            .iter()
            .map(|a| (a.as_str(), subject.pairs[*a].as_str()))
            .collect();
        let object = &registry.objects()[rng.gen_range(0..registry.object_count())];
        let op = OPERATIONS[rng.gen_range(0..OPERATIONS.len())];
        let sc = match signed.get(&(s, credential.clone())) {
            Some(sc) => sc.clone(),
            None => {
                let sc = sign_credential(&keys[s], &credential)?;
                signed.insert((s, credential), sc.clone());
                sc
            }
        };
        requests.push(AccessRequest {
            seq,
            signed_credential: sc,
            object_id: object.id.clone(),
            op: Some(op.to_string()),
            env: Default::default(),
        });
    }
    Ok(requests)
}

/// Half the rules (rounded up) copy values from a real subject and object so
/// they are satisfiable; the rest draw values uniformly. Each rule constrains
/// `size` subject/object attributes plus the operation.
fn generate_policies(
    spec: &CaseSpec,
    registry: &Registry,
    n: usize,
    size: usize,
    rng: &mut ChaCha20Rng,
) -> Vec<PolicyRule> {
    let attrs: Vec<(String, bool)> = (0..spec.n_subject_attrs)
        .map(|i| (CaseSpec::subject_attr(i), true))
        .chain((0..spec.n_object_attrs).map(|i| (CaseSpec::object_attr(i), false)))
        .collect();
    let width = n.to_string().len().max(4);
    let realized = n.div_ceil(2);
    (0..n)
        .map(|i| {
            let chosen: Vec<&(String, bool)> = attrs.choose_multiple(rng, size).collect();
            let mut constraints = std::collections::BTreeMap::new();
            if i < realized {
                let subject = &registry.subjects()[rng.gen_range(0..registry.subject_count())];
                let object = &registry.objects()[rng.gen_range(0..registry.object_count())];
                for (name, is_subject) in chosen {
                    let source = if *is_subject { &subject.pairs } else { &object.pairs };
                    constraints.insert(name.clone(), source[name].clone());
                }
            } else {
                for (name, _) in chosen {
                    constraints.insert(name.clone(), format!("v{}", rng.gen_range(0..spec.value_range)));
                }
            }
            constraints.insert("op".to_string(), OPERATIONS[rng.gen_range(0..OPERATIONS.len())].to_string());
            PolicyRule {
                id: format!("p{:0width$}", i + 1),
                constraints,
            }
        })
        .collect()
}

const SPACE_FILE: &str = "space.json";
const POPULATION_FILE: &str = "population.jsonl";
const POLICIES_FILE: &str = "policies.json";
const REQUESTS_FILE: &str = "requests.jsonl";
const MANIFEST_FILE: &str = "manifest.json";

pub fn write_workload(dir: &Path, workload: &Workload) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(SPACE_FILE), workload.space().to_json_pretty())?;
    write_population(&dir.join(POPULATION_FILE), &workload.registry)?;
    fs::write(
        dir.join(POLICIES_FILE),
        serde_json::to_string_pretty(&workload.policies)?,
    )?;
    let mut out = BufWriter::new(fs::File::create(dir.join(REQUESTS_FILE))?);
    for req in &workload.requests {
        serde_json::to_writer(&mut out, req)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&workload.manifest)?,
    )?;
    Ok(())
}

pub fn read_workload(dir: &Path) -> Result<Workload> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let space = Arc::new(AttributeSpace::from_json(&fs::read_to_string(dir.join(SPACE_FILE))?)?);
    let registry = read_population(&dir.join(POPULATION_FILE), space)?;
    let policies: Vec<PolicyRule> = serde_json::from_str(&fs::read_to_string(dir.join(POLICIES_FILE))?)?;
    let requests = read_requests(&dir.join(REQUESTS_FILE))?;
    let counts = manifest.counts;
    if registry.subject_count() != counts.subjects
        || registry.object_count() != counts.objects
        || policies.len() != counts.policies
        || requests.len() != counts.requests
    {
        return Err(Error::Corrupt(format!(
            "workload in {} does not match its manifest counts",
            dir.display()
        )));
    }
    Ok(Workload {
        manifest,
        registry,
        policies,
        requests,
    })
}

pub fn read_requests(path: &Path) -> Result<Vec<AccessRequest>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Corrupt(format!("request line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}
