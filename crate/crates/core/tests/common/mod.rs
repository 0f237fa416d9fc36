//! Random small instances and brute-force reference implementations.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use qaebac::crypto::{keygen, sign_credential, KeyPair};
use qaebac::model::{
    AccessRequest, AttrClass, AttributeDef, AttributeSpace, AvPair, Credential, HistoryRecord, Ledger,
    Outcome, PolicyRule, Reason, Registry,
};
use qaebac::optimizer::WeightList;
use rand::seq::SliceRandom;
use rand::Rng;

pub struct Instance {
    pub space: Arc<AttributeSpace>,
    pub registry: Registry,
    pub keys: Vec<KeyPair>,
    /// Each subject's pairs, indexed like the registry.
    pub rows: Vec<BTreeMap<String, String>>,
    pub ledger: Ledger,
}

pub fn attr_name(i: usize) -> String {
    format!("x{i}")
}

/// Up to `max_attrs` subject attributes with 1..=3 values each.
pub fn random_space(rng: &mut impl Rng, max_attrs: usize) -> Arc<AttributeSpace> {
    let n = rng.gen_range(1..=max_attrs);
    let defs = (0..n)
        .map(|i| {
            let k = rng.gen_range(1..=3);
            AttributeDef::new(attr_name(i), AttrClass::Subject, 1.0, (0..k).map(|v| format!("v{v}")))
        })
        .collect();
    Arc::new(AttributeSpace::new(defs).unwrap())
}

/// A random subset of attributes with random in-domain values.
pub fn random_pairs(rng: &mut impl Rng, space: &AttributeSpace, p_present: f64) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for d in space.defs() {
        if rng.gen_bool(p_present) {
            out.insert(d.name.clone(), d.domain.choose(rng).unwrap().clone());
        }
    }
    out
}

/// Population of 1..=max_subjects with sparse rows, plus a random history
/// that includes rejected (bad-signature) records.
pub fn random_instance(rng: &mut impl Rng, max_subjects: usize, max_attrs: usize, history: usize) -> Instance {
    let space = random_space(rng, max_attrs);
    let mut registry = Registry::new(space.clone());
    let mut keys = Vec::new();
    let mut rows = Vec::new();
    let n = rng.gen_range(1..=max_subjects);
    for i in 0..n {
        let row = random_pairs(rng, &space, 0.7);
        let pairs: Vec<AvPair> = row.iter().map(|(a, v)| AvPair::new(a, v)).collect();
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&(i as u64).to_le_bytes());
        seed[8..16].copy_from_slice(&rng.gen::<u64>().to_le_bytes());
        let key = keygen(Some(&seed)).unwrap();
        registry.register_subject(&pairs, key.public_key()).unwrap();
        keys.push(key);
        rows.push(row);
    }
    let mut ledger = Ledger::new();
    for seq in 1..=history as u64 {
        let s = rng.gen_range(0..n);
        let credential = random_credential_of(rng, &rows[s]);
        let mut sc = sign_credential(&keys[s], &credential).unwrap();
        let reason = if rng.gen_bool(0.15) {
            sc.signature.0[0] ^= 1;
            Reason::BadSignature
        } else if rng.gen_bool(0.5) {
            Reason::Granted
        } else {
            Reason::NoPath
        };
        ledger
            .append(HistoryRecord {
                request: AccessRequest {
                    seq,
                    signed_credential: sc,
                    object_id: "o".into(),
                    op: None,
                    env: BTreeMap::new(),
                },
                true_subject: registry.subject_at(s as u32).id.clone(),
                outcome: reason.outcome(),
                reason,
                entropy: None,
            })
            .unwrap();
    }
    Instance {
        space,
        registry,
        keys,
        rows,
        ledger,
    }
}

/// A non-empty subset of `row` when `row` is non-empty.
pub fn random_credential_of(rng: &mut impl Rng, row: &BTreeMap<String, String>) -> Credential {
    let c: Credential = row
        .iter()
        .filter(|_| rng.gen_bool(0.5))
        .map(|(a, v)| (a.as_str(), v.as_str()))
        .collect();
    if c.is_empty() {
        if let Some((a, v)) = row.iter().next() {
            return [(a.as_str(), v.as_str())].into_iter().collect();
        }
    }
    c
}

pub fn random_policies(rng: &mut impl Rng, space: &AttributeSpace, max_rules: usize) -> Vec<PolicyRule> {
    let n = rng.gen_range(0..=max_rules);
    (0..n)
        .filter_map(|i| {
            let c = random_pairs(rng, space, 0.5);
            (!c.is_empty()).then(|| PolicyRule {
                id: format!("r{i:02}"),
                constraints: c,
            })
        })
        .collect()
}

pub fn random_weights(rng: &mut impl Rng, space: &AttributeSpace) -> WeightList {
    let mut names: Vec<&str> = space.defs().iter().map(|d| d.name.as_str()).collect();
    names.shuffle(rng);
    WeightList::from_order(space, &names).unwrap()
}

fn contains(row: &BTreeMap<String, String>, c: &Credential) -> bool {
    c.iter().all(|(a, v)| row.get(a).map(String::as_str) == Some(v))
}

/// Subject indices and weights of the credential's subject space, by
/// definition: generators weigh one each, plus one per authenticated use.
pub fn brute_subject_space(inst: &Instance, c: &Credential) -> BTreeMap<u32, u64> {
    let mut out = BTreeMap::new();
    for (i, row) in inst.rows.iter().enumerate() {
        if contains(row, c) {
            out.insert(i as u32, 1);
        }
    }
    for rec in inst.ledger.records() {
        if rec.reason == Reason::BadSignature || &rec.request.signed_credential.credential != c {
            continue;
        }
        let s = inst.registry.subject_index(&rec.true_subject).unwrap();
        *out.entry(s).or_insert(0) += 1;
    }
    out
}

pub fn brute_entropy(weights: &BTreeMap<u32, u64>) -> f64 {
    let total: u64 = weights.values().sum();
    let h: f64 = weights
        .values()
        .map(|&w| {
            let p = w as f64 / total as f64;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Smallest number of subjects whose pairs include a cohort member's full
/// pair set, over members holding at least `t` attributes.
pub fn brute_r(inst: &Instance, t: usize) -> Option<usize> {
    inst.rows
        .iter()
        .filter(|row| row.len() >= t)
        .map(|row| {
            inst.rows
                .iter()
                .filter(|other| row.iter().all(|(a, v)| other.get(a) == Some(v)))
                .count()
        })
        .min()
}

/// Direct statement of exact and subset rule satisfaction.
pub fn brute_match(policies: &[PolicyRule], request: &BTreeMap<String, String>, exact: bool) -> bool {
    policies.iter().any(|p| {
        let sub = p.constraints.iter().all(|(a, v)| request.get(a) == Some(v));
        sub && (!exact || p.constraints.len() == request.len())
    })
}

pub fn sorted_ids(space: &AttributeSpace, pairs: &BTreeMap<String, String>) -> Vec<qaebac::model::PairId> {
    let mut ids: Vec<_> = pairs.iter().map(|(a, v)| space.pair_id(a, v).unwrap()).collect();
    ids.sort_unstable();
    ids
}

pub fn distinct<T: Ord + Clone>(xs: &[T]) -> usize {
    xs.iter().cloned().collect::<BTreeSet<_>>().len()
}

pub fn outcome_of(matched: bool) -> Outcome {
    if matched {
        Outcome::Grant
    } else {
        Outcome::Deny
    }
}

pub struct Skew {
    pub registry: Registry,
    pub policies: Vec<PolicyRule>,
    pub requests: Vec<AccessRequest>,
}

/// Subjects over three binary attributes plus a binary `z` that has the
/// lowest initial weight. Every combination is held by three subjects. The
/// rules grant exactly the full credentials with `z=z1`, so `z` alone decides
/// every request: `z=z0` is always denied.
pub fn skew_stream(n_requests: usize, rng: &mut impl Rng) -> Skew {
    let defs = vec![
        AttributeDef::new("a", AttrClass::Subject, 1.0, ["a0", "a1"]),
        AttributeDef::new("b", AttrClass::Subject, 1.0, ["b0", "b1"]),
        AttributeDef::new("c", AttrClass::Subject, 1.0, ["c0", "c1"]),
        AttributeDef::new("z", AttrClass::Subject, 0.1, ["z0", "z1"]),
    ];
    let space = Arc::new(AttributeSpace::new(defs).unwrap());
    let mut registry = Registry::new(space);
    let mut keys = Vec::new();
    let mut policies = Vec::new();
    for combo in 0..16u32 {
        let bit = |i: u32| (combo >> i) & 1;
        let row = [
            ("a", format!("a{}", bit(0))),
            ("b", format!("b{}", bit(1))),
            ("c", format!("c{}", bit(2))),
            ("z", format!("z{}", bit(3))),
        ];
        if bit(3) == 1 {
            policies.push(PolicyRule::new(format!("r{combo:02}"), row.clone()));
        }
        let pairs: Vec<AvPair> = row.iter().map(|(a, v)| AvPair::new(*a, v)).collect();
        for copy in 0..3u8 {
            let key = keygen(Some(&[combo as u8 * 3 + copy + 1; 32])).unwrap();
            registry.register_subject(&pairs, key.public_key()).unwrap();
            keys.push(key);
        }
    }
    registry.register_object("o", &[]).unwrap();
    let requests = (1..=n_requests as u64)
        .map(|seq| {
            let s = rng.gen_range(0..keys.len());
            let c: Credential = registry.subjects()[s]
                .pairs
                .iter()
                .map(|(a, v)| (a.as_str(), v.as_str()))
                .collect();
            AccessRequest {
                seq,
                signed_credential: sign_credential(&keys[s], &c).unwrap(),
                object_id: "o".into(),
                op: None,
                env: BTreeMap::new(),
            }
        })
        .collect();
    Skew {
        registry,
        policies,
        requests,
    }
}
