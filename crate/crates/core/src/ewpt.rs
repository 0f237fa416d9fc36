//! Entropy-Weighted Path Tree: policy rules stored as root-to-leaf paths whose
//! keys are ordered by descending attribute weight.
//!
//! Comparison counting follows a sibling-scan model: looking up a key at a
//! node costs one equality test per child examined in insertion order, so a
//! hit at position `i` costs `i + 1` and a miss costs the number of children.
//! Wide nodes keep a hash index for speed; the counter is derived from the
//! child's insertion position, never from the index.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::model::{AttributeSpace, AvPair, PairId, PolicyRule};
use crate::optimizer::WeightList;

const INDEX_THRESHOLD: usize = 8;

#[derive(Clone, Debug)]
pub struct PathNode {
    /// `None` only for the root.
    pub key: Option<PairId>,
    children: Vec<u32>,
    index: Option<HashMap<PairId, u32>>,
    /// Rules whose path ends here; non-empty iff the node is a leaf.
    pub rule_ids: Vec<String>,
}

impl PathNode {
    fn new(key: Option<PairId>) -> Self {
        PathNode {
            key,
            children: Vec::new(),
            index: None,
            rule_ids: Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        !self.rule_ids.is_empty()
    }

    pub fn children(&self) -> &[u32] {
        &self.children
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathOutcome {
    Matched,
    /// A request key had no child to descend into.
    NoPath,
    /// All keys consumed but the final node completes no rule.
    Incomplete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatchOutcome {
    pub outcome: PathOutcome,
    pub comparisons: u32,
}

impl MatchOutcome {
    pub fn matched(&self) -> bool {
        self.outcome == PathOutcome::Matched
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum MatchMode {
    /// Every request pair must be consumed along one path (exact-set match).
    #[default]
    Strict,
    /// Request pairs a rule does not constrain may be skipped.
    Subset,
}

impl MatchMode {
    pub fn semantics(self) -> Semantics {
        match self {
            MatchMode::Strict => Semantics::Exact,
            MatchMode::Subset => Semantics::Subset,
        }
    }
}

impl std::str::FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(MatchMode::Strict),
            "subset" => Ok(MatchMode::Subset),
            other => Err(Error::InvalidArgument(format!("unknown match mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Ewpt {
    nodes: Vec<PathNode>,
    weight_version: u64,
}

/// Position of each attribute's pairs in `weights`, as a sort key.
fn sort_key(space: &AttributeSpace, weights: &WeightList, p: PairId) -> (u32, u32) {
    let attr = space.attr_of(p);
    (weights.rank(attr).unwrap_or(u32::MAX), attr.0)
}

/// Sorts pair ids by descending attribute weight (ties already broken by name
/// inside the weight list).
pub fn sort_by_weight(space: &AttributeSpace, weights: &WeightList, pairs: &mut [PairId]) {
    pairs.sort_by_key(|&p| sort_key(space, weights, p));
}

impl Ewpt {
    /// Inserts every rule, in ascending id order, as a path of its
    /// constraints sorted by `weights`.
    pub fn build(
        policies: &[PolicyRule],
        space: &AttributeSpace,
        weights: &WeightList,
        weight_version: u64,
    ) -> Result<Self> {
        let mut tree = Ewpt {
            nodes: vec![PathNode::new(None)],
            weight_version,
        };
        let mut ordered: Vec<&PolicyRule> = policies.iter().collect();
        ordered.sort_by(|a, b| a.id.cmp(&b.id));
        for rule in ordered {
            if rule.constraints.is_empty() {
                return Err(Error::EmptyRule(rule.id.clone()));
            }
            let mut path = space.intern_map(&rule.constraints, None)?;
            for &p in &path {
                let attr = space.attr_of(p);
                if weights.rank(attr).is_none() {
                    return Err(Error::UnweightedAttribute {
                        rule: rule.id.clone(),
                        attr: space.def(attr).name.clone(),
                    });
                }
            }
            sort_by_weight(space, weights, &mut path);
            tree.insert(&path, &rule.id);
        }
        Ok(tree)
    }

    fn insert(&mut self, path: &[PairId], rule_id: &str) {
        let mut current = 0u32;
        for &key in path {
            current = match self.find_child(current, key).0 {
                Some(child) => child,
                None => self.add_child(current, key),
            };
        }
        let node = &mut self.nodes[current as usize];
        if !node.rule_ids.iter().any(|r| r == rule_id) {
            node.rule_ids.push(rule_id.to_string());
        }
    }

    fn add_child(&mut self, parent: u32, key: PairId) -> u32 {
        let child = self.nodes.len() as u32;
        self.nodes.push(PathNode::new(Some(key)));
        let node = &mut self.nodes[parent as usize];
        node.children.push(child);
        let pos = node.children.len() as u32 - 1;
        if let Some(index) = node.index.as_mut() {
            index.insert(key, pos);
        } else if node.children.len() > INDEX_THRESHOLD {
            let nodes = &self.nodes;
            let node = &self.nodes[parent as usize];
            let index: HashMap<PairId, u32> = node
                .children
                .iter()
                .enumerate()
                .map(|(pos, &c)| (nodes[c as usize].key.expect("child has key"), pos as u32))
                .collect();
            self.nodes[parent as usize].index = Some(index);
        }
        child
    }

    /// Child with `key` under `node`, plus the comparisons a sibling scan spends.
    fn find_child(&self, node: u32, key: PairId) -> (Option<u32>, u32) {
        let node = &self.nodes[node as usize];
        match &node.index {
            Some(index) => match index.get(&key) {
                Some(&pos) => (Some(node.children[pos as usize]), pos + 1),
                None => (None, node.children.len() as u32),
            },
            None => {
                for (pos, &c) in node.children.iter().enumerate() {
                    if self.nodes[c as usize].key == Some(key) {
                        return (Some(c), pos as u32 + 1);
                    }
                }
                (None, node.children.len() as u32)
            }
        }
    }

    pub fn weight_version(&self) -> u64 {
        self.weight_version
    }

    pub fn root(&self) -> &PathNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: u32) -> &PathNode {
        &self.nodes[id as usize]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Walks the tree consuming every element of `seq` in order.
    pub fn match_strict(&self, seq: &[PairId]) -> MatchOutcome {
        let mut comparisons = 0;
        let mut current = 0u32;
        for &key in seq {
            let (child, spent) = self.find_child(current, key);
            comparisons += spent;
            match child {
                Some(c) => current = c,
                None => {
                    return MatchOutcome {
                        outcome: PathOutcome::NoPath,
                        comparisons,
                    }
                }
            }
        }
        let outcome = if self.nodes[current as usize].is_leaf() {
            PathOutcome::Matched
        } else {
            PathOutcome::Incomplete
        };
        MatchOutcome {
            outcome,
            comparisons,
        }
    }

    /// Searches for a leaf whose path is a subsequence of `seq`.
    ///
    /// Paths and `seq` share one key order and keys are distinct, so each
    /// node is entered with exactly one position; the search visits every
    /// node at most once.
    pub fn match_subset(&self, seq: &[PairId]) -> MatchOutcome {
        let mut comparisons = 0;
        let matched = self.descend_subset(0, seq, 0, &mut comparisons);
        MatchOutcome {
            outcome: if matched {
                PathOutcome::Matched
            } else {
                PathOutcome::NoPath
            },
            comparisons,
        }
    }

    fn descend_subset(&self, node: u32, seq: &[PairId], pos: usize, comparisons: &mut u32) -> bool {
        let n = &self.nodes[node as usize];
        if n.is_leaf() {
            return true;
        }
        if n.children.is_empty() {
            return false;
        }
        for i in pos..seq.len() {
            let (child, spent) = self.find_child(node, seq[i]);
            *comparisons += spent;
            if let Some(c) = child {
                if self.descend_subset(c, seq, i + 1, comparisons) {
                    return true;
                }
            }
        }
        false
    }

    pub fn match_mode(&self, mode: MatchMode, seq: &[PairId]) -> MatchOutcome {
        match mode {
            MatchMode::Strict => self.match_strict(seq),
            MatchMode::Subset => self.match_subset(seq),
        }
    }

    /// Every leaf-marked path as (pairs from the root, rule ids).
    pub fn paths(&self, space: &AttributeSpace) -> Vec<(Vec<AvPair>, Vec<String>)> {
        let mut out = Vec::new();
        let mut stack = vec![(0u32, Vec::new())];
        while let Some((id, prefix)) = stack.pop() {
            let node = &self.nodes[id as usize];
            if node.is_leaf() {
                out.push((prefix.clone(), node.rule_ids.clone()));
            }
            for &c in node.children.iter().rev() {
                let mut next = prefix.clone();
                next.push(space.av_pair(self.nodes[c as usize].key.expect("child has key")));
                stack.push((c, next));
            }
        }
        out
    }

    /// Structural rendering (keys and child order), for shape comparisons.
    pub fn render(&self, space: &AttributeSpace) -> String {
        fn walk(tree: &Ewpt, space: &AttributeSpace, id: u32, depth: usize, out: &mut String) {
            let node = &tree.nodes[id as usize];
            if let Some(k) = node.key {
                let (a, v) = space.pair(k);
                out.push_str(&format!("{}{}={}", "  ".repeat(depth), a, v));
                if node.is_leaf() {
                    out.push_str(&format!(" [{}]", node.rule_ids.join(",")));
                }
                out.push('\n');
            }
            for &c in &node.children {
                walk(tree, space, c, depth + usize::from(node.key.is_some()), out);
            }
        }
        let mut out = String::new();
        walk(self, space, 0, 0, &mut out);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Semantics {
    /// Some rule's constraints equal the request's pair set.
    Exact,
    /// Some rule's constraints are contained in the request's pair set.
    Subset,
}

/// Reference rule scan over string pairs.
pub fn linear_scan(
    policies: &[PolicyRule],
    pairs: &BTreeMap<String, String>,
    semantics: Semantics,
) -> bool {
    policies.iter().any(|rule| {
        let contained = rule
            .constraints
            .iter()
            .all(|(a, v)| pairs.get(a) == Some(v));
        match semantics {
            Semantics::Subset => contained,
            Semantics::Exact => contained && rule.constraints.len() == pairs.len(),
        }
    })
}

/// Rules as sorted pair-id lists for the linear baseline.
#[derive(Clone, Debug, Default)]
pub struct CompiledPolicies {
    rules: Vec<Vec<PairId>>,
}

impl CompiledPolicies {
    pub fn compile(policies: &[PolicyRule], space: &AttributeSpace) -> Result<Self> {
        let mut ordered: Vec<&PolicyRule> = policies.iter().collect();
        ordered.sort_by(|a, b| a.id.cmp(&b.id));
        let rules = ordered
            .into_iter()
            .map(|r| {
                if r.constraints.is_empty() {
                    return Err(Error::EmptyRule(r.id.clone()));
                }
                space.intern_map(&r.constraints, None)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CompiledPolicies { rules })
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Scans rules in id order. `request` must be sorted ascending.
    /// Counts one comparison per constraint tested, and one per rule
    /// rejected on size alone under exact semantics.
    pub fn scan(&self, request: &[PairId], semantics: Semantics) -> MatchOutcome {
        let mut comparisons = 0;
        for rule in &self.rules {
            if semantics == Semantics::Exact && rule.len() != request.len() {
                comparisons += 1;
                continue;
            }
            let mut ok = true;
            for p in rule {
                comparisons += 1;
                if request.binary_search(p).is_err() {
                    ok = false;
                    break;
                }
            }
            if ok {
                return MatchOutcome {
                    outcome: PathOutcome::Matched,
                    comparisons,
                };
            }
        }
        MatchOutcome {
            outcome: PathOutcome::NoPath,
            comparisons,
        }
    }
}
