//! Credential subject spaces, request entropy, (r,t)-anonymity and subject
//! anonymity scores.
//!
//! A credential's subject space is everyone who could have produced it (their
//! pairs include every pair of the credential) plus everyone recorded as having
//! used it. Each member is weighted by one for being able to generate the
//! credential plus one per recorded authenticated use, and the request entropy
//! is the Shannon entropy of the normalized weights.

use crate::crypto::{verify_credential, SignedCredential};
use crate::entropy::shannon_entropy;
use crate::error::{Error, Result};
use crate::model::{Credential, Ledger, Matrix, Registry};
use crate::par;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubjectSpace {
    pub credential: Credential,
    /// Subjects able to generate the credential, ascending by registry index.
    pub generators: Vec<u32>,
    /// Subjects with at least one recorded use of the credential, ascending.
    pub historical_users: Vec<u32>,
    /// Union of both sets with usage weights, ascending by registry index.
    pub members: Vec<(u32, u64)>,
}

impl SubjectSpace {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn weight(&self, subject: u32) -> u64 {
        self.members
            .binary_search_by_key(&subject, |&(s, _)| s)
            .map(|i| self.members[i].1)
            .unwrap_or(0)
    }

    pub fn member_ids<'m>(&self, matrix: Matrix<'m>) -> Vec<&'m str> {
        self.members
            .iter()
            .map(|&(s, _)| matrix.subject_id(s))
            .collect()
    }
}

/// Verifies the credential signature, then builds its subject space.
pub fn build_subject_space(
    sc: &SignedCredential,
    registry: &Registry,
    ledger: &Ledger,
) -> Result<SubjectSpace> {
    if registry.subject_by_pk(&sc.signer_pk).is_none() || !verify_credential(&sc.signer_pk, sc) {
        return Err(Error::ForgedCredential);
    }
    let space = construct_subject_space(&sc.credential, registry.matrix(), ledger);
    if space.is_empty() {
        return Err(Error::InvalidConfiguration);
    }
    Ok(space)
}

/// Builds the subject space from trusted data, skipping signature checks.
/// The result may be empty.
pub fn construct_subject_space(c: &Credential, matrix: Matrix<'_>, ledger: &Ledger) -> SubjectSpace {
    let generators = match matrix.intern_credential(c) {
        Some(ids) => matrix.generators(&ids),
        None => Vec::new(),
    };
    let mut members: Vec<(u32, u64)> = generators.iter().map(|&s| (s, 1)).collect();
    let mut historical_users = Vec::new();
    for (id, uses) in ledger.usage(c) {
        let Some(s) = matrix.subject_index(id) else {
            continue;
        };
        historical_users.push(s);
        match members.binary_search_by_key(&s, |&(m, _)| m) {
            Ok(i) => members[i].1 += uses,
            Err(i) => members.insert(i, (s, *uses)),
        }
    }
    historical_users.sort_unstable();
    SubjectSpace {
        credential: c.clone(),
        generators,
        historical_users,
        members,
    }
}

/// Request entropy in bits; exactly zero for a single-member space.
pub fn request_entropy(space: &SubjectSpace) -> f64 {
    if space.members.len() <= 1 {
        return 0.0;
    }
    shannon_entropy(space.members.iter().map(|&(_, w)| w))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RtResult {
    pub t: usize,
    /// Subjects holding at least `t` attributes, ascending.
    pub cohort: Vec<u32>,
    /// Smallest generator-set size over the cohort, each subject presenting
    /// its full pair set.
    pub r: usize,
}

/// Number of subjects whose pairs include all of `subject`'s pairs.
pub fn full_set_generators(matrix: Matrix<'_>, subject: u32) -> usize {
    matrix.generators(matrix.row(subject)).len()
}

pub fn rt_anonymity(matrix: Matrix<'_>, t: usize) -> Result<RtResult> {
    if t == 0 {
        return Err(Error::InvalidArgument("t must be at least 1".into()));
    }
    let cohort: Vec<u32> = (0..matrix.subject_count() as u32)
        .filter(|&s| matrix.row(s).len() >= t)
        .collect();
    if cohort.is_empty() {
        return Err(Error::EmptyCohort(t));
    }
    let sizes = par::map(&cohort, |&s| full_set_generators(matrix, s));
    let r = sizes.into_iter().min().expect("cohort is non-empty");
    Ok(RtResult { t, cohort, r })
}

/// Per-t terms of the subject anonymity sum for one population and history.
///
/// Each subject's full-pair-set space does not depend on `t`, so the term
/// for a given `t` is shared by every subject with at least `t` attributes;
/// a subject's score is the sum of the terms for `t = 1..=|s|`.
#[derive(Clone, Debug)]
pub struct SubjectAnonymityTable {
    terms: Vec<f64>,
}

impl SubjectAnonymityTable {
    pub fn build(matrix: Matrix<'_>, ledger: &Ledger) -> Self {
        let n = matrix.subject_count();
        let per_subject: Vec<(usize, usize, f64)> = par::map_range(n, |s| {
            let s = s as u32;
            let row = matrix.row(s);
            let c: Credential = row
                .iter()
                .map(|&p| matrix.space().pair(p))
                .collect();
            let space = construct_subject_space(&c, matrix, ledger);
            (row.len(), space.len(), request_entropy(&space))
        });
        let max_len = per_subject.iter().map(|x| x.0).max().unwrap_or(0);
        let mut terms = Vec::with_capacity(max_len);
        for t in 1..=max_len {
            let cohort = per_subject.iter().filter(|x| x.0 >= t);
            let total: usize = cohort.clone().map(|x| x.1).sum();
            let term: f64 = cohort
                .map(|&(_, size, e)| e * size as f64 / total as f64)
                .sum();
            terms.push(term);
        }
        SubjectAnonymityTable { terms }
    }

    /// Score of a subject holding `attr_count` attributes.
    pub fn score(&self, attr_count: usize) -> f64 {
        self.terms[..attr_count.min(self.terms.len())].iter().sum()
    }

    pub fn terms(&self) -> &[f64] {
        &self.terms
    }
}

/// Anonymity score of one subject, in bits.
pub fn subject_anonymity(subject_id: &str, registry: &Registry, ledger: &Ledger) -> Result<f64> {
    let idx = registry
        .subject_index(subject_id)
        .ok_or_else(|| Error::UnknownSubject(subject_id.to_string()))?;
    let matrix = registry.matrix();
    let len = matrix.row(idx).len();
    if len == 0 {
        return Ok(0.0);
    }
    Ok(SubjectAnonymityTable::build(matrix, ledger).score(len))
}
