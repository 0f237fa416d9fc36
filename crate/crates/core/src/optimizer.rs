//! Recent-decision pool and attribute weighting.
//!
//! An attribute's weight is its information gain about the grant/deny outcome
//! over the pool plus an anonymity term derived from the subject matrix.

use std::collections::VecDeque;

use serde::Serialize;

use crate::anonymity::rt_anonymity;
use crate::entropy::shannon_entropy;
use crate::error::{Error, Result};
use crate::model::{AttrId, AttributeSpace, Matrix, Outcome, PairId, Reason};

pub const DEFAULT_POOL_CAPACITY: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionRecord {
    /// Every pair present in the request, ascending.
    pub pairs: Vec<PairId>,
    pub outcome: Outcome,
    pub reason: Reason,
    pub seq: u64,
}

impl DecisionRecord {
    pub fn from_pairs(
        space: &AttributeSpace,
        pairs: &[(&str, &str)],
        outcome: Outcome,
        seq: u64,
    ) -> Result<Self> {
        let mut ids = pairs
            .iter()
            .map(|(a, v)| space.pair_id(a, v))
            .collect::<Result<Vec<_>>>()?;
        ids.sort_unstable();
        Ok(DecisionRecord {
            pairs: ids,
            outcome,
            reason: match outcome {
                Outcome::Grant => Reason::Granted,
                Outcome::Deny => Reason::NoPath,
            },
            seq,
        })
    }

    fn value_of(&self, space: &AttributeSpace, attr: AttrId) -> Option<PairId> {
        self.pairs.iter().copied().find(|&p| space.attr_of(p) == attr)
    }
}

/// Bounded FIFO of recent decisions.
#[derive(Clone, Debug)]
pub struct AahPool {
    capacity: usize,
    records: VecDeque<DecisionRecord>,
    last_seq: Option<u64>,
}

impl AahPool {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("pool capacity must be positive".into()));
        }
        Ok(AahPool {
            capacity,
            records: VecDeque::with_capacity(capacity.min(1 << 16)),
            last_seq: None,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DecisionRecord> {
        self.records.iter()
    }

    pub fn record(&mut self, rec: DecisionRecord) -> Result<()> {
        if let Some(last) = self.last_seq {
            if rec.seq <= last {
                return Err(Error::NonMonotoneSeq { last, got: rec.seq });
            }
        }
        self.last_seq = Some(rec.seq);
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(rec);
        Ok(())
    }

    fn outcome_counts<'a>(records: impl Iterator<Item = &'a DecisionRecord>) -> [u64; 2] {
        let mut counts = [0u64; 2];
        for r in records {
            counts[(r.outcome == Outcome::Deny) as usize] += 1;
        }
        counts
    }
}

/// Entropy of the grant/deny outcome over the pool; zero when empty.
pub fn decision_entropy(pool: &AahPool) -> f64 {
    shannon_entropy(AahPool::outcome_counts(pool.iter()))
}

/// Reduction in outcome entropy from conditioning on `attr`'s value.
///
/// Records without the attribute form their own partition.
pub fn information_gain(pool: &AahPool, space: &AttributeSpace, attr: AttrId) -> f64 {
    if pool.is_empty() {
        return 0.0;
    }
    let domain = space.def(attr).domain.len();
    let first = space.pairs_of(attr).next().map(|p| p.0).unwrap_or(0);
    // Last slot holds the "attribute absent" partition.
    let mut table = vec![[0u64; 2]; domain + 1];
    for r in pool.iter() {
        let slot = match r.value_of(space, attr) {
            Some(p) => (p.0 - first) as usize,
            None => domain,
        };
        table[slot][(r.outcome == Outcome::Deny) as usize] += 1;
    }
    let n = pool.len() as f64;
    let h_d = decision_entropy(pool);
    let h_cond: f64 = table
        .iter()
        .filter(|c| c[0] + c[1] > 0)
        .map(|c| (c[0] + c[1]) as f64 / n * shannon_entropy(*c))
        .sum();
    (h_d - h_cond).clamp(0.0, h_d)
}

/// Anonymity contribution of one attribute, normalized to `[0, 1]`.
///
/// Uses the smallest cohort of subjects sharing one value of the attribute;
/// an attribute no subject holds counts as shared by all `N` subjects.
pub fn attribute_anonymity(matrix: Matrix<'_>, attr: AttrId) -> Result<f64> {
    let n = matrix.subject_count();
    if n == 0 {
        return Err(Error::EmptyPopulation);
    }
    if attr.0 as usize >= matrix.space().len() {
        return Err(Error::UnknownAttribute(format!("#{}", attr.0)));
    }
    let r = matrix
        .space()
        .pairs_of(attr)
        .map(|p| matrix.holders(p).len())
        .filter(|&k| k > 0)
        .min()
        .unwrap_or(n);
    if n < 2 {
        return Ok(0.0);
    }
    Ok((r as f64).log2() / (n as f64).log2())
}

/// How the anonymity term of the weight is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AnonymityTerm {
    /// Per-attribute smallest value cohort, log-normalized to `[0, 1]`.
    #[default]
    Normalized,
    /// The population-wide `r` at `t = 1`, identical for every attribute.
    RawR,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightEntry {
    pub attr: String,
    #[serde(skip)]
    pub id: AttrId,
    pub info_gain: f64,
    pub anonymity_term: f64,
    pub weight: f64,
}

/// Attributes ordered by descending weight, ties by ascending name.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightList {
    entries: Vec<WeightEntry>,
    ranks: Vec<u32>,
}

impl WeightList {
    pub fn from_entries(mut entries: Vec<WeightEntry>) -> Self {
        entries.sort_by(|a, b| {
            b.weight
                .total_cmp(&a.weight)
                .then_with(|| a.attr.as_bytes().cmp(b.attr.as_bytes()))
        });
        let slots = entries.iter().map(|e| e.id.0 as usize + 1).max().unwrap_or(0);
        let mut ranks = vec![u32::MAX; slots];
        for (rank, e) in entries.iter().enumerate() {
            ranks[e.id.0 as usize] = rank as u32;
        }
        WeightList { entries, ranks }
    }

    /// Ordering from the configured initial weights.
    pub fn initial(space: &AttributeSpace) -> Self {
        Self::from_entries(
            space
                .attr_ids()
                .map(|id| {
                    let def = space.def(id);
                    WeightEntry {
                        attr: def.name.clone(),
                        id,
                        info_gain: 0.0,
                        anonymity_term: 0.0,
                        weight: def.initial_weight,
                    }
                })
                .collect(),
        )
    }

    /// Builds a list whose order is exactly `names`, for tests and fixtures.
    pub fn from_order(space: &AttributeSpace, names: &[&str]) -> Result<Self> {
        let n = names.len();
        let entries = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                Ok(WeightEntry {
                    attr: name.to_string(),
                    id: space.require(name)?,
                    info_gain: 0.0,
                    anonymity_term: 0.0,
                    weight: (n - i) as f64,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_entries(entries))
    }

    pub fn entries(&self) -> &[WeightEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.attr.as_str()).collect()
    }

    /// Position of the attribute in the list, or `None` if absent.
    pub fn rank(&self, attr: AttrId) -> Option<u32> {
        self.ranks
            .get(attr.0 as usize)
            .copied()
            .filter(|&r| r != u32::MAX)
    }

    /// CSV with columns `attr,info_gain,anonymity_term,weight,rank`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("attr,info_gain,anonymity_term,weight,rank\n");
        for (rank, e) in self.entries.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.attr, e.info_gain, e.anonymity_term, e.weight, rank
            ));
        }
        out
    }
}

pub fn compute_weights(
    space: &AttributeSpace,
    pool: &AahPool,
    matrix: Matrix<'_>,
    term: AnonymityTerm,
) -> WeightList {
    let raw_r = match term {
        AnonymityTerm::RawR => rt_anonymity(matrix, 1).map(|rt| rt.r as f64).unwrap_or(0.0),
        AnonymityTerm::Normalized => 0.0,
    };
    let entries = space
        .attr_ids()
        .map(|id| {
            let info_gain = information_gain(pool, space, id);
            let anonymity_term = match term {
                AnonymityTerm::Normalized => attribute_anonymity(matrix, id).unwrap_or(0.0),
                AnonymityTerm::RawR => raw_r,
            };
            WeightEntry {
                attr: space.def(id).name.clone(),
                id,
                info_gain,
                anonymity_term,
                weight: info_gain + anonymity_term,
            }
        })
        .collect();
    WeightList::from_entries(entries)
}
