use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::space::AvPair;

/// A set of subject attribute assignments presented in place of an identity.
///
/// Stored as an ordered map so that equality, hashing and iteration are
/// independent of the order pairs were supplied in.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Credential(BTreeMap<String, String>);

impl Credential {
    pub fn new() -> Self {
        Credential(BTreeMap::new())
    }

    pub fn from_map(pairs: BTreeMap<String, String>) -> Self {
        Credential(pairs)
    }

    pub fn insert(&mut self, attr: impl Into<String>, value: impl Into<String>) {
        self.0.insert(attr.into(), value.into());
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, attr: &str) -> Option<&str> {
        self.0.get(attr).map(String::as_str)
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(a, v)| (a.as_str(), v.as_str()))
    }

    pub fn to_pairs(&self) -> Vec<AvPair> {
        self.iter().map(|(a, v)| AvPair::new(a, v)).collect()
    }

    /// `self ⊆ pairs`, comparing both attribute and value.
    pub fn is_subset_of(&self, pairs: &BTreeMap<String, String>) -> bool {
        self.0.iter().all(|(a, v)| pairs.get(a) == Some(v))
    }
}

impl<A: Into<String>, V: Into<String>> FromIterator<(A, V)> for Credential {
    fn from_iter<I: IntoIterator<Item = (A, V)>>(iter: I) -> Self {
        Credential(
            iter.into_iter()
                .map(|(a, v)| (a.into(), v.into()))
                .collect(),
        )
    }
}

impl FromIterator<AvPair> for Credential {
    fn from_iter<I: IntoIterator<Item = AvPair>>(iter: I) -> Self {
        Credential(iter.into_iter().map(|p| (p.attr, p.value)).collect())
    }
}
