use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::credential::Credential;
use super::space::{AttrClass, AttributeSpace, AvPair, PairId};
use crate::crypto::PublicKey;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubjectRecord {
    pub id: String,
    pub pairs: BTreeMap<String, String>,
    pub pk: PublicKey,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectRecord {
    pub id: String,
    pub pairs: BTreeMap<String, String>,
}

/// One line of a population file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationLine {
    pub kind: PopulationKind,
    pub id: String,
    pub pairs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pk: Option<PublicKey>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PopulationKind {
    Subject,
    Object,
}

/// Subject and object registries.
///
/// Alongside the records it keeps the subject attribute matrix in both
/// orientations: one sorted row of pair ids per subject, and one sorted
/// posting list of subjects per pair id.
#[derive(Clone, Debug)]
pub struct Registry {
    space: Arc<AttributeSpace>,
    subjects: Vec<SubjectRecord>,
    rows: Vec<Vec<PairId>>,
    postings: Vec<Vec<u32>>,
    subject_by_id: HashMap<String, u32>,
    subject_by_pk: HashMap<PublicKey, u32>,
    objects: Vec<ObjectRecord>,
    object_rows: Vec<Vec<PairId>>,
    object_by_id: HashMap<String, u32>,
}

impl Registry {
    pub fn new(space: Arc<AttributeSpace>) -> Self {
        let postings = vec![Vec::new(); space.pair_count()];
        Registry {
            space,
            subjects: Vec::new(),
            rows: Vec::new(),
            postings,
            subject_by_id: HashMap::new(),
            subject_by_pk: HashMap::new(),
            objects: Vec::new(),
            object_rows: Vec::new(),
            object_by_id: HashMap::new(),
        }
    }

    pub fn space(&self) -> &Arc<AttributeSpace> {
        &self.space
    }

    /// Registers a subject under a fresh `s<n>` identifier.
    pub fn register_subject(&mut self, pairs: &[AvPair], pk: PublicKey) -> Result<String> {
        let mut n = self.subjects.len();
        let mut id = format!("s{n}");
        while self.subject_by_id.contains_key(&id) {
            n += 1;
            id = format!("s{n}");
        }
        self.register_subject_as(id, pairs, pk)
    }

    pub fn register_subject_as(
        &mut self,
        id: impl Into<String>,
        pairs: &[AvPair],
        pk: PublicKey,
    ) -> Result<String> {
        let map = self.space.intern_list(pairs, Some(AttrClass::Subject))?;
        self.insert_subject(id.into(), map, pk)
    }

    pub(crate) fn insert_subject(
        &mut self,
        id: String,
        pairs: BTreeMap<String, String>,
        pk: PublicKey,
    ) -> Result<String> {
        let row = self.space.intern_map(&pairs, Some(AttrClass::Subject))?;
        if self.subject_by_id.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        if let Some(&owner) = self.subject_by_pk.get(&pk) {
            return Err(Error::DuplicateKey(self.subjects[owner as usize].id.clone()));
        }
        let idx = self.subjects.len() as u32;
        for &p in &row {
            self.postings[p.0 as usize].push(idx);
        }
        self.rows.push(row);
        self.subject_by_id.insert(id.clone(), idx);
        self.subject_by_pk.insert(pk, idx);
        self.subjects.push(SubjectRecord {
            id: id.clone(),
            pairs,
            pk,
        });
        Ok(id)
    }

    pub fn register_object(&mut self, id: impl Into<String>, pairs: &[AvPair]) -> Result<String> {
        let map = self.space.intern_list(pairs, Some(AttrClass::Object))?;
        self.insert_object(id.into(), map)
    }

    pub(crate) fn insert_object(
        &mut self,
        id: String,
        pairs: BTreeMap<String, String>,
    ) -> Result<String> {
        let row = self.space.intern_map(&pairs, Some(AttrClass::Object))?;
        if self.object_by_id.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.object_by_id
            .insert(id.clone(), self.objects.len() as u32);
        self.object_rows.push(row);
        self.objects.push(ObjectRecord {
            id: id.clone(),
            pairs,
        });
        Ok(id)
    }

    pub fn load_population_line(&mut self, line: PopulationLine) -> Result<()> {
        match line.kind {
            PopulationKind::Subject => {
                let pk = line
                    .pk
                    .ok_or_else(|| Error::KeyMaterial(format!("subject `{}` has no pk", line.id)))?;
                self.insert_subject(line.id, line.pairs, pk)?;
            }
            PopulationKind::Object => {
                self.insert_object(line.id, line.pairs)?;
            }
        }
        Ok(())
    }

    pub fn population_lines(&self) -> impl Iterator<Item = PopulationLine> + '_ {
        let subjects = self.subjects.iter().map(|s| PopulationLine {
            kind: PopulationKind::Subject,
            id: s.id.clone(),
            pairs: s.pairs.clone(),
            pk: Some(s.pk),
        });
        let objects = self.objects.iter().map(|o| PopulationLine {
            kind: PopulationKind::Object,
            id: o.id.clone(),
            pairs: o.pairs.clone(),
            pk: None,
        });
        subjects.chain(objects)
    }

    /// The subject's pairs for exactly the requested attribute names.
    pub fn derive_credential(&self, subject_id: &str, names: &[&str]) -> Result<Credential> {
        let subject = self
            .subject(subject_id)
            .ok_or_else(|| Error::UnknownSubject(subject_id.to_string()))?;
        if names.is_empty() {
            return Err(Error::EmptyCredential);
        }
        names
            .iter()
            .map(|&name| {
                subject
                    .pairs
                    .get(name)
                    .map(|v| (name.to_string(), v.clone()))
                    .ok_or_else(|| Error::NotAssigned(name.to_string()))
            })
            .collect()
    }

    pub fn subject_count(&self) -> usize {
        self.subjects.len()
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn subjects(&self) -> &[SubjectRecord] {
        &self.subjects
    }

    pub fn objects(&self) -> &[ObjectRecord] {
        &self.objects
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectRecord> {
        self.subject_index(id).map(|i| &self.subjects[i as usize])
    }

    pub fn subject_index(&self, id: &str) -> Option<u32> {
        self.subject_by_id.get(id).copied()
    }

    pub fn subject_at(&self, idx: u32) -> &SubjectRecord {
        &self.subjects[idx as usize]
    }

    pub fn subject_by_pk(&self, pk: &PublicKey) -> Option<u32> {
        self.subject_by_pk.get(pk).copied()
    }

    pub fn object(&self, id: &str) -> Option<&ObjectRecord> {
        self.object_by_id.get(id).map(|&i| &self.objects[i as usize])
    }

    pub(crate) fn object_row(&self, id: &str) -> Option<&[PairId]> {
        self.object_by_id
            .get(id)
            .map(|&i| self.object_rows[i as usize].as_slice())
    }

    pub fn matrix(&self) -> Matrix<'_> {
        Matrix { registry: self }
    }
}

/// Read-only view of the subject attribute matrix.
#[derive(Clone, Copy)]
pub struct Matrix<'a> {
    registry: &'a Registry,
}

impl<'a> Matrix<'a> {
    pub fn space(&self) -> &'a AttributeSpace {
        &self.registry.space
    }

    pub fn subject_count(&self) -> usize {
        self.registry.rows.len()
    }

    pub fn row(&self, subject: u32) -> &'a [PairId] {
        &self.registry.rows[subject as usize]
    }

    pub fn holders(&self, pair: PairId) -> &'a [u32] {
        &self.registry.postings[pair.0 as usize]
    }

    pub fn subject_id(&self, subject: u32) -> &'a str {
        &self.registry.subjects[subject as usize].id
    }

    pub fn subject_index(&self, id: &str) -> Option<u32> {
        self.registry.subject_index(id)
    }

    /// Subjects whose pairs include every pair of `cred`, ascending.
    pub fn generators(&self, cred: &[PairId]) -> Vec<u32> {
        if cred.is_empty() {
            return (0..self.subject_count() as u32).collect();
        }
        let mut lists: Vec<&[u32]> = cred.iter().map(|&p| self.holders(p)).collect();
        lists.sort_by_key(|l| l.len());
        let mut acc: Vec<u32> = lists[0].to_vec();
        for list in &lists[1..] {
            if acc.is_empty() {
                break;
            }
            acc.retain(|s| list.binary_search(s).is_ok());
        }
        acc
    }

    /// Interns a credential; `None` if it names a pair outside the space,
    /// in which case no subject can hold it.
    pub fn intern_credential(&self, c: &Credential) -> Option<Vec<PairId>> {
        self.space().intern_map(c.as_map(), None).ok()
    }

    /// (subject, attr, value) triples read through the rows.
    pub fn triples_by_row(&self) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        for s in 0..self.subject_count() as u32 {
            for &p in self.row(s) {
                let (a, v) = self.space().pair(p);
                out.push((self.subject_id(s).to_string(), a.to_string(), v.to_string()));
            }
        }
        out.sort();
        out
    }

    /// The same triples read through the posting lists.
    pub fn triples_by_column(&self) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        for p in 0..self.space().pair_count() as u32 {
            let (a, v) = self.space().pair(PairId(p));
            for &s in self.holders(PairId(p)) {
                out.push((self.subject_id(s).to_string(), a.to_string(), v.to_string()));
            }
        }
        out.sort();
        out
    }
}
