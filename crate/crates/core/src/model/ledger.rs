use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::credential::Credential;
use super::request::{AccessRequest, Outcome, Reason};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub request: AccessRequest,
    /// Ground-truth initiator. Known to the engine only.
    pub true_subject: String,
    pub outcome: Outcome,
    pub reason: Reason,
    /// Request entropy in bits; absent when the pipeline stopped before computing it.
    #[serde(default)]
    pub entropy: Option<f64>,
}

impl HistoryRecord {
    pub fn seq(&self) -> u64 {
        self.request.seq
    }
}

/// Append-only history of requests and decisions.
#[derive(Clone, Debug, Default)]
pub struct Ledger {
    records: Vec<HistoryRecord>,
    by_credential: HashMap<Credential, Vec<u32>>,
    usage: HashMap<Credential, Vec<(String, u64)>>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_seq(&self) -> Option<u64> {
        self.records.last().map(HistoryRecord::seq)
    }

    pub fn records(&self) -> &[HistoryRecord] {
        &self.records
    }

    pub fn append(&mut self, record: HistoryRecord) -> Result<()> {
        if let Some(last) = self.last_seq() {
            if record.seq() <= last {
                return Err(Error::NonMonotoneSeq {
                    last,
                    got: record.seq(),
                });
            }
        }
        let credential = &record.request.signed_credential.credential;
        let idx = self.records.len() as u32;
        self.by_credential
            .entry(credential.clone())
            .or_default()
            .push(idx);
        // Forged or tampered requests do not make their key holder a user
        // of the credential they carried.
        if record.reason != Reason::BadSignature {
            let users = self.usage.entry(credential.clone()).or_default();
            match users.iter_mut().find(|(s, _)| *s == record.true_subject) {
                Some((_, n)) => *n += 1,
                None => users.push((record.true_subject.clone(), 1)),
            }
        }
        self.records.push(record);
        Ok(())
    }

    /// (initiator, seq) of every record carrying exactly this credential, in seq order.
    pub fn query_by_credential(&self, c: &Credential) -> Vec<(String, u64)> {
        self.by_credential
            .get(c)
            .map(|idxs| {
                idxs.iter()
                    .map(|&i| {
                        let r = &self.records[i as usize];
                        (r.true_subject.clone(), r.seq())
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Authenticated usage counts per initiator for a credential.
    pub fn usage(&self, c: &Credential) -> &[(String, u64)] {
        self.usage.get(c).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{keygen, sign_credential};

    fn record(seq: u64, subject: &str, c: &Credential) -> HistoryRecord {
        let keys = keygen(Some(&[1; 32])).unwrap();
        HistoryRecord {
            request: AccessRequest {
                seq,
                signed_credential: sign_credential(&keys, c).unwrap(),
                object_id: "o1".into(),
                op: None,
                env: Default::default(),
            },
            true_subject: subject.into(),
            outcome: Outcome::Deny,
            reason: Reason::NoPath,
            entropy: Some(0.0),
        }
    }

    fn cred(p: &[(&str, &str)]) -> Credential {
        p.iter().copied().collect()
    }

    #[test]
    fn append_enforces_monotone_seq() {
        let c = cred(&[("dept", "eng")]);
        let mut ledger = Ledger::new();
        assert!(ledger.query_by_credential(&c).is_empty());
        ledger.append(record(1, "s1", &c)).unwrap();
        assert_eq!(ledger.len(), 1);
        assert!(matches!(
            ledger.append(record(1, "s1", &c)),
            Err(Error::NonMonotoneSeq { last: 1, got: 1 })
        ));
        ledger.append(record(2, "s2", &c)).unwrap();
        assert_eq!(
            ledger.query_by_credential(&c),
            vec![("s1".to_string(), 1), ("s2".to_string(), 2)]
        );
    }

    #[test]
    fn query_is_exact_set_match() {
        let c = cred(&[("dept", "eng"), ("role", "dev")]);
        let other = cred(&[("dept", "eng")]);
        let mut ledger = Ledger::new();
        ledger.append(record(1, "s1", &c)).unwrap();
        ledger.append(record(2, "s2", &other)).unwrap();
        ledger.append(record(3, "s1", &c)).unwrap();
        let permuted = cred(&[("role", "dev"), ("dept", "eng")]);
        let hits: Vec<_> = ledger
            .query_by_credential(&permuted)
            .into_iter()
            .map(|(s, _)| s)
            .collect();
        assert_eq!(hits, ["s1", "s1"]);
        assert_eq!(ledger.usage(&c), &[("s1".to_string(), 2)]);
    }

    #[test]
    fn bad_signature_records_do_not_count_as_usage() {
        let c = cred(&[("dept", "eng")]);
        let mut ledger = Ledger::new();
        let mut r = record(1, "s1", &c);
        r.reason = Reason::BadSignature;
        ledger.append(r).unwrap();
        assert_eq!(ledger.query_by_credential(&c).len(), 1);
        assert!(ledger.usage(&c).is_empty());
    }
}
