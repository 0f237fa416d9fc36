//! The authorization pipeline.
//!
//! A decision runs three steps in order: signature verification, the
//! anonymity floor on the request entropy, and policy matching. Matching uses
//! the current [`PolicySnapshot`] (weights plus tree) for the tree variants, or
//! a rule-by-rule scan for the linear variant. After a decision is fixed it is
//! appended to the ledger and the decision pool; the full variant then
//! rebuilds its snapshot every `update_interval` decisions.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::anonymity::{construct_subject_space, request_entropy};
use crate::crypto::{canonical_encode, verify_message, SignedCredential};
use crate::error::{Error, Result};
use crate::ewpt::{sort_by_weight, CompiledPolicies, Ewpt, MatchMode, MatchOutcome, PathOutcome};
use crate::model::{
    AccessRequest, AttrClass, AttributeSpace, AvPair, HistoryRecord, Ledger, Outcome, PairId,
    PolicyRule, Reason, Registry,
};
use crate::optimizer::{compute_weights, AahPool, AnonymityTerm, DecisionRecord, WeightList};
use crate::par;

const VERIFY_CACHE_LIMIT: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Tree rebuilt from fresh weights every `update_interval` decisions.
    Full,
    /// Tree built once from the initial weights.
    Static,
    /// No tree; every rule is scanned per request.
    Linear,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::Static, Variant::Linear];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Static => "static",
            Variant::Linear => "linear",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "static" => Ok(Variant::Static),
            "linear" => Ok(Variant::Linear),
            other => Err(Error::UnknownVariant(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    /// Minimum request entropy in bits.
    pub threshold: f64,
    pub mode: MatchMode,
    /// Decisions between rebuilds of the full variant.
    pub update_interval: usize,
    pub pool_capacity: usize,
    pub anonymity_term: AnonymityTerm,
    /// Memoize signature checks. Signatures are deterministic, so a
    /// (key, signature, message) triple always verifies the same way.
    pub verify_cache: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            threshold: 1.0,
            mode: MatchMode::Strict,
            update_interval: 1000,
            pool_capacity: crate::optimizer::DEFAULT_POOL_CAPACITY,
            anonymity_term: AnonymityTerm::Normalized,
            verify_cache: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.threshold < 0.0 || !self.threshold.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "threshold must be a non-negative number, got {}",
                self.threshold
            )));
        }
        if self.update_interval == 0 {
            return Err(Error::InvalidArgument("update interval must be at least 1".into()));
        }
        if self.pool_capacity == 0 {
            return Err(Error::InvalidArgument("pool capacity must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub seq: u64,
    pub outcome: Outcome,
    pub reason: Reason,
    /// Key comparisons spent matching; zero when matching did not run.
    pub comparisons: u32,
    /// Request entropy; `None` when the pipeline stopped before computing it.
    pub entropy: Option<f64>,
}

impl Decision {
    fn new(seq: u64, reason: Reason, comparisons: u32, entropy: Option<f64>) -> Self {
        Decision {
            seq,
            outcome: reason.outcome(),
            reason,
            comparisons,
            entropy,
        }
    }

    pub fn log_line(&self, variant: Variant) -> DecisionLine {
        DecisionLine {
            seq: self.seq,
            outcome: self.outcome,
            reason: self.reason.as_str(),
            entropy: self.entropy.unwrap_or(0.0),
            comparisons: self.comparisons,
            variant: variant.as_str(),
        }
    }
}

/// One line of the decision log.
#[derive(Clone, Debug, Serialize)]
pub struct DecisionLine {
    pub seq: u64,
    pub outcome: Outcome,
    pub reason: &'static str,
    pub entropy: f64,
    pub comparisons: u32,
    pub variant: &'static str,
}

/// Weights and the tree built from them, published together.
#[derive(Debug)]
pub struct PolicySnapshot {
    pub version: u64,
    pub weights: WeightList,
    pub tree: Ewpt,
}

/// Result of the history-independent steps for one request.
#[derive(Clone, Copy, Debug)]
struct Prepared {
    signer: Option<u32>,
    path: Option<MatchOutcome>,
}

pub struct Engine {
    variant: Variant,
    config: EngineConfig,
    space: Arc<AttributeSpace>,
    registry: Registry,
    ledger: Ledger,
    pool: AahPool,
    policies: Vec<PolicyRule>,
    compiled: CompiledPolicies,
    snapshot: Arc<PolicySnapshot>,
    since_rebuild: usize,
    rebuilds: usize,
    verified: RwLock<HashMap<Vec<u8>, bool>>,
    entropy_evaluations: AtomicU64,
}

impl Engine {
    pub fn new(
        registry: Registry,
        ledger: Ledger,
        policies: Vec<PolicyRule>,
        variant: Variant,
        config: EngineConfig,
    ) -> Result<Self> {
        config.validate()?;
        let space = registry.space().clone();
        let weights = WeightList::initial(&space);
        let tree = Ewpt::build(&policies, &space, &weights, 0)?;
        let compiled = CompiledPolicies::compile(&policies, &space)?;
        let pool = AahPool::new(config.pool_capacity)?;
        Ok(Engine {
            variant,
            config,
            space,
            registry,
            ledger,
            pool,
            policies,
            compiled,
            snapshot: Arc::new(PolicySnapshot {
                version: 0,
                weights,
                tree,
            }),
            since_rebuild: 0,
            rebuilds: 0,
            verified: RwLock::new(HashMap::new()),
            entropy_evaluations: AtomicU64::new(0),
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn space(&self) -> &Arc<AttributeSpace> {
        &self.space
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn pool(&self) -> &AahPool {
        &self.pool
    }

    pub fn policies(&self) -> &[PolicyRule] {
        &self.policies
    }

    pub fn snapshot(&self) -> Arc<PolicySnapshot> {
        Arc::clone(&self.snapshot)
    }

    pub fn rebuild_count(&self) -> usize {
        self.rebuilds
    }

    /// How many times the anonymity step has run.
    pub fn entropy_evaluations(&self) -> u64 {
        self.entropy_evaluations.load(Ordering::Relaxed)
    }

    pub fn into_parts(self) -> (Registry, Ledger) {
        (self.registry, self.ledger)
    }

    /// Decides a request without recording it.
    pub fn authorize(&self, req: &AccessRequest) -> Decision {
        let signer = self.verify_step(&req.signed_credential);
        let snapshot = Arc::clone(&self.snapshot);
        self.decide(req, signer, || self.match_step(req, &snapshot))
    }

    /// Decides, records, and rebuilds when due.
    pub fn submit(&mut self, req: &AccessRequest) -> Result<Decision> {
        let decision = self.authorize(req);
        self.record(req, &decision)?;
        self.maybe_rebuild()?;
        Ok(decision)
    }

    /// Replays a stream in order. With `parallel`, signature checks and path
    /// matching run concurrently between rebuilds while the history-dependent
    /// anonymity step stays sequential, so decisions are identical to a
    /// sequential replay.
    pub fn replay(&mut self, requests: &[AccessRequest], parallel: bool) -> Result<Vec<Decision>> {
        let mut out = Vec::with_capacity(requests.len());
        if !parallel {
            for req in requests {
                out.push(self.submit(req)?);
            }
            return Ok(out);
        }
        let mut rest = requests;
        while !rest.is_empty() {
            let take = match self.variant {
                Variant::Full => self.config.update_interval - self.since_rebuild,
                _ => rest.len(),
            }
            .min(rest.len())
            .min(1 << 14);
            let (segment, tail) = rest.split_at(take);
            rest = tail;
            let snapshot = Arc::clone(&self.snapshot);
            let prepared: Vec<Prepared> = {
                let this = &*self;
                par::map(segment, |req| Prepared {
                    signer: this.verify_step(&req.signed_credential),
                    path: Some(this.match_step(req, &snapshot)),
                })
            };
            for (req, pre) in segment.iter().zip(prepared) {
                let decision = self.decide(req, pre.signer, || pre.path.expect("prepared"));
                self.record(req, &decision)?;
                self.maybe_rebuild()?;
                out.push(decision);
            }
        }
        Ok(out)
    }

    fn decide(
        &self,
        req: &AccessRequest,
        signer: Option<u32>,
        path: impl FnOnce() -> MatchOutcome,
    ) -> Decision {
        if signer.is_none() {
            return Decision::new(req.seq, Reason::BadSignature, 0, None);
        }
        self.entropy_evaluations.fetch_add(1, Ordering::Relaxed);
        let space = construct_subject_space(
            &req.signed_credential.credential,
            self.registry.matrix(),
            &self.ledger,
        );
        let entropy = request_entropy(&space);
        if space.is_empty() || entropy < self.config.threshold {
            return Decision::new(req.seq, Reason::LowAnonymity, 0, Some(entropy));
        }
        let m = path();
        let reason = match m.outcome {
            PathOutcome::Matched => Reason::Granted,
            PathOutcome::NoPath => Reason::NoPath,
            PathOutcome::Incomplete => Reason::IncompletePath,
        };
        Decision::new(req.seq, reason, m.comparisons, Some(entropy))
    }

    /// Registry index of the signer if the key is registered and the
    /// signature verifies.
    fn verify_step(&self, sc: &SignedCredential) -> Option<u32> {
        let signer = self.registry.subject_by_pk(&sc.signer_pk)?;
        let message = canonical_encode(&sc.credential).ok()?;
        let ok = if self.config.verify_cache {
            let mut key = Vec::with_capacity(96 + message.len());
            key.extend_from_slice(&sc.signer_pk.0);
            key.extend_from_slice(&sc.signature.0);
            key.extend_from_slice(&message);
            let cached = self.verified.read().expect("cache lock").get(&key).copied();
            match cached {
                Some(ok) => ok,
                None => {
                    let ok = verify_message(&sc.signer_pk, &message, &sc.signature);
                    let mut cache = self.verified.write().expect("cache lock");
                    if cache.len() < VERIFY_CACHE_LIMIT {
                        cache.insert(key, ok);
                    }
                    ok
                }
            }
        } else {
            verify_message(&sc.signer_pk, &message, &sc.signature)
        };
        ok.then_some(signer)
    }

    fn match_step(&self, req: &AccessRequest, snapshot: &PolicySnapshot) -> MatchOutcome {
        let Ok(mut pairs) = request_pair_ids(req, &self.registry) else {
            return MatchOutcome {
                outcome: PathOutcome::NoPath,
                comparisons: 0,
            };
        };
        match self.variant {
            Variant::Linear => self.compiled.scan(&pairs, self.config.mode.semantics()),
            Variant::Full | Variant::Static => {
                sort_by_weight(&self.space, &snapshot.weights, &mut pairs);
                snapshot.tree.match_mode(self.config.mode, &pairs)
            }
        }
    }

    /// Appends a fixed decision to the ledger and the decision pool.
    pub fn record(&mut self, req: &AccessRequest, decision: &Decision) -> Result<()> {
        let true_subject = self
            .registry
            .subject_by_pk(&req.signed_credential.signer_pk)
            .map(|i| self.registry.subject_at(i).id.clone())
            .unwrap_or_default();
        let pairs = request_pair_ids(req, &self.registry)
            .unwrap_or_else(|_| lossy_pair_ids(req, &self.registry));
        self.ledger.append(HistoryRecord {
            request: req.clone(),
            true_subject,
            outcome: decision.outcome,
            reason: decision.reason,
            entropy: decision.entropy,
        })?;
        self.pool.record(DecisionRecord {
            pairs,
            outcome: decision.outcome,
            reason: decision.reason,
            seq: req.seq,
        })?;
        self.since_rebuild += 1;
        Ok(())
    }

    /// Rebuilds the full variant's snapshot once `update_interval` decisions
    /// have accumulated. Returns whether a rebuild happened.
    pub fn maybe_rebuild(&mut self) -> Result<bool> {
        if self.variant != Variant::Full || self.since_rebuild < self.config.update_interval {
            return Ok(false);
        }
        self.rebuild()?;
        Ok(true)
    }

    /// Recomputes weights from the pool and matrix and publishes a new tree.
    pub fn rebuild(&mut self) -> Result<()> {
        let weights = compute_weights(
            &self.space,
            &self.pool,
            self.registry.matrix(),
            self.config.anonymity_term,
        );
        let version = self.snapshot.version + 1;
        let tree = Ewpt::build(&self.policies, &self.space, &weights, version)?;
        self.snapshot = Arc::new(PolicySnapshot {
            version,
            weights,
            tree,
        });
        self.since_rebuild = 0;
        self.rebuilds += 1;
        Ok(())
    }
}

/// Credential, object, operation and environment pairs of a request,
/// ascending by id. Fails if the object is unknown or any pair is outside
/// the space or in the wrong class.
pub fn request_pair_ids(req: &AccessRequest, registry: &Registry) -> Result<Vec<PairId>> {
    let space = registry.space();
    let object = registry
        .object_row(&req.object_id)
        .ok_or_else(|| Error::UnknownObject(req.object_id.clone()))?;
    let mut ids = space.intern_map(req.signed_credential.credential.as_map(), Some(AttrClass::Subject))?;
    ids.extend_from_slice(object);
    if let Some(op) = &req.op {
        let attr = space
            .operation_attr()
            .ok_or_else(|| Error::InvalidArgument("space declares no single operation attribute".into()))?;
        ids.push(space.pair_id(&space.def(attr).name, op)?);
    }
    ids.extend(space.intern_map(&req.env, Some(AttrClass::Environment))?);
    ids.sort_unstable();
    Ok(ids)
}

fn lossy_pair_ids(req: &AccessRequest, registry: &Registry) -> Vec<PairId> {
    let space = registry.space();
    let mut ids: Vec<PairId> = req
        .signed_credential
        .credential
        .iter()
        .chain(req.env.iter().map(|(a, v)| (a.as_str(), v.as_str())))
        .filter_map(|(a, v)| space.pair_id(a, v).ok())
        .collect();
    if let Some(obj) = registry.object_row(&req.object_id) {
        ids.extend_from_slice(obj);
    }
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// The request's pairs ordered by descending weight.
pub fn sort_request_attributes(
    req: &AccessRequest,
    registry: &Registry,
    weights: &WeightList,
) -> Result<Vec<AvPair>> {
    let mut ids = request_pair_ids(req, registry)?;
    sort_by_weight(registry.space(), weights, &mut ids);
    Ok(ids.into_iter().map(|p| registry.space().av_pair(p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{keygen, sign_credential, KeyPair};
    use crate::model::{AttributeDef, Credential};

    struct Fixture {
        registry: Registry,
        keys: Vec<KeyPair>,
    }

    /// Subjects over a,b,c,d mirroring the path-tree example, plus one object.
    fn fixture(subjects: &[&[(&str, &str)]]) -> Fixture {
        let space = Arc::new(
            AttributeSpace::new(vec![
                AttributeDef::new("a", AttrClass::Subject, 4.0, ["a1", "a2", "a3"]),
                AttributeDef::new("b", AttrClass::Subject, 3.0, ["b1", "b2"]),
                AttributeDef::new("c", AttrClass::Subject, 2.0, ["c1", "c2"]),
                AttributeDef::new("d", AttrClass::Subject, 1.0, ["d1"]),
                AttributeDef::new("op", AttrClass::Operation, 0.0, ["read", "write"]),
            ])
            .unwrap(),
        );
        let mut registry = Registry::new(space);
        let mut keys = Vec::new();
        for (i, row) in subjects.iter().enumerate() {
            let k = keygen(Some(&[i as u8 + 10; 32])).unwrap();
            let pairs: Vec<AvPair> = row.iter().map(|(a, v)| AvPair::new(*a, *v)).collect();
            registry.register_subject(&pairs, k.public_key()).unwrap();
            keys.push(k);
        }
        registry.register_object("o", &[]).unwrap();
        Fixture { registry, keys }
    }

    fn rules() -> Vec<PolicyRule> {
        vec![
            PolicyRule::new("r1", [("a", "a1"), ("b", "b1"), ("c", "c1")]),
            PolicyRule::new("r2", [("a", "a2"), ("b", "b1"), ("c", "c1"), ("d", "d1")]),
            PolicyRule::new("r3", [("a", "a2"), ("c", "c2")]),
            PolicyRule::new("r4", [("a", "a3"), ("b", "b2"), ("c", "c2")]),
        ]
    }

    fn request(keys: &KeyPair, seq: u64, pairs: &[(&str, &str)]) -> AccessRequest {
        let c: Credential = pairs.iter().copied().collect();
        AccessRequest {
            seq,
            signed_credential: sign_credential(keys, &c).unwrap(),
            object_id: "o".into(),
            op: None,
            env: Default::default(),
        }
    }

    const TWINS: &[&[(&str, &str)]] = &[
        &[("a", "a3"), ("b", "b2"), ("c", "c1")],
        &[("a", "a3"), ("b", "b2"), ("c", "c1")],
        &[("a", "a2"), ("c", "c2")],
    ];

    #[test]
    fn tampered_request_stops_before_entropy() {
        let f = fixture(TWINS);
        let engine = Engine::new(f.registry, Ledger::new(), rules(), Variant::Static, EngineConfig::default())
            .unwrap();
        let mut req = request(&f.keys[0], 1, &[("a", "a3")]);
        req.signed_credential.credential.insert("a", "a2");
        let d = engine.authorize(&req);
        assert_eq!((d.outcome, d.reason, d.entropy), (Outcome::Deny, Reason::BadSignature, None));
        assert_eq!(engine.entropy_evaluations(), 0);
    }

    #[test]
    fn unique_credential_is_low_anonymity() {
        let f = fixture(TWINS);
        let engine = Engine::new(f.registry, Ledger::new(), rules(), Variant::Static, EngineConfig::default())
            .unwrap();
        let d = engine.authorize(&request(&f.keys[2], 1, &[("a", "a2"), ("c", "c2")]));
        assert_eq!(d.reason, Reason::LowAnonymity);
        assert_eq!(d.entropy, Some(0.0));
        assert_eq!(engine.entropy_evaluations(), 1);
    }

    #[test]
    fn figure_two_request_through_pipeline() {
        let f = fixture(TWINS);
        let space = f.registry.space().clone();
        let config = EngineConfig {
            threshold: 0.0,
            ..EngineConfig::default()
        };
        let mut engine = Engine::new(f.registry, Ledger::new(), rules(), Variant::Static, config).unwrap();
        let req = request(&f.keys[0], 1, &[("a", "a3"), ("b", "b2"), ("c", "c1")]);
        // Initial weights order a,b,c,d.
        assert_eq!(engine.authorize(&req).comparisons, 5);
        engine.snapshot = Arc::new(PolicySnapshot {
            version: 9,
            weights: WeightList::from_order(&space, &["c", "b", "a", "d", "op"]).unwrap(),
            tree: Ewpt::build(
                &rules(),
                &space,
                &WeightList::from_order(&space, &["c", "b", "a", "d", "op"]).unwrap(),
                9,
            )
            .unwrap(),
        });
        let d = engine.authorize(&req);
        assert_eq!((d.reason, d.comparisons), (Reason::NoPath, 2));
        assert_eq!(d.entropy, Some(1.0));
        let sorted = sort_request_attributes(&req, engine.registry(), &engine.snapshot().weights).unwrap();
        let names: Vec<String> = sorted.iter().map(|p| p.to_string()).collect();
        assert_eq!(names, ["c=c1", "b=b2", "a=a3"]);
    }

    #[test]
    fn unresolvable_object_denies_without_comparisons() {
        let f = fixture(TWINS);
        let config = EngineConfig {
            threshold: 0.0,
            ..EngineConfig::default()
        };
        let engine = Engine::new(f.registry, Ledger::new(), rules(), Variant::Full, config).unwrap();
        let mut req = request(&f.keys[0], 1, &[("a", "a3")]);
        req.object_id = "nowhere".into();
        let d = engine.authorize(&req);
        assert_eq!((d.reason, d.comparisons), (Reason::NoPath, 0));
    }

    #[test]
    fn rebuild_counter() {
        let f = fixture(TWINS);
        let config = EngineConfig {
            threshold: 0.0,
            update_interval: 3,
            ..EngineConfig::default()
        };
        let mut engine = Engine::new(f.registry, Ledger::new(), rules(), Variant::Full, config.clone())
            .unwrap();
        let mut rebuild_points = Vec::new();
        for seq in 1..=10 {
            engine
                .submit(&request(&f.keys[0], seq, &[("a", "a3")]))
                .unwrap();
            if engine.rebuild_count() > rebuild_points.len() {
                rebuild_points.push(seq);
            }
        }
        assert_eq!(rebuild_points, [3, 6, 9]);
        assert_eq!(engine.snapshot().version, 3);
    }

    #[test]
    fn static_and_linear_never_rebuild() {
        for variant in [Variant::Static, Variant::Linear] {
            let f = fixture(TWINS);
            let config = EngineConfig {
                update_interval: 1,
                ..EngineConfig::default()
            };
            let mut engine = Engine::new(f.registry, Ledger::new(), rules(), variant, config).unwrap();
            for seq in 1..=50 {
                engine
                    .submit(&request(&f.keys[1], seq, &[("b", "b2")]))
                    .unwrap();
            }
            assert_eq!(engine.rebuild_count(), 0);
            assert_eq!(engine.snapshot().version, 0);
        }
    }

    #[test]
    fn decisions_are_recorded() {
        let f = fixture(TWINS);
        let mut engine = Engine::new(f.registry, Ledger::new(), rules(), Variant::Linear, EngineConfig::default())
            .unwrap();
        let mut bad = request(&f.keys[0], 1, &[("a", "a3")]);
        bad.signed_credential.signature.0[5] ^= 0x40;
        engine.submit(&bad).unwrap();
        engine.submit(&request(&f.keys[0], 2, &[("a", "a3")])).unwrap();
        assert!(engine.submit(&request(&f.keys[0], 2, &[("a", "a3")])).is_err());
        assert_eq!(engine.ledger().len(), 2);
        assert_eq!(engine.pool().len(), 2);
        assert_eq!(engine.ledger().records()[0].reason, Reason::BadSignature);
        assert_eq!(engine.ledger().records()[1].true_subject, "s0");
    }

    #[test]
    fn config_validation() {
        let bad = [
            EngineConfig { threshold: -1.0, ..EngineConfig::default() },
            EngineConfig { update_interval: 0, ..EngineConfig::default() },
            EngineConfig { pool_capacity: 0, ..EngineConfig::default() },
        ];
        for config in bad {
            assert!(config.validate().is_err());
        }
        assert_eq!("linear".parse::<Variant>().unwrap(), Variant::Linear);
        assert!(matches!("tree".parse::<Variant>(), Err(Error::UnknownVariant(_))));
    }
}
