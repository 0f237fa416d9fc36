use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Partition of the attribute space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrClass {
    Subject,
    Object,
    Environment,
    Operation,
}

impl AttrClass {
    pub fn as_str(self) -> &'static str {
        match self {
            AttrClass::Subject => "subject",
            AttrClass::Object => "object",
            AttrClass::Environment => "environment",
            AttrClass::Operation => "operation",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "subject" => Ok(AttrClass::Subject),
            "object" => Ok(AttrClass::Object),
            "environment" => Ok(AttrClass::Environment),
            "operation" => Ok(AttrClass::Operation),
            other => Err(Error::UnknownClass(other.to_string())),
        }
    }
}

impl fmt::Display for AttrClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributeDef {
    pub name: String,
    pub class: AttrClass,
    pub initial_weight: f64,
    pub domain: Vec<String>,
}

impl AttributeDef {
    pub fn new<S: Into<String>>(
        name: impl Into<String>,
        class: AttrClass,
        initial_weight: f64,
        domain: impl IntoIterator<Item = S>,
    ) -> Self {
        AttributeDef {
            name: name.into(),
            class,
            initial_weight,
            domain: domain.into_iter().map(Into::into).collect(),
        }
    }
}

/// A single attribute-value assignment.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AvPair {
    pub attr: String,
    pub value: String,
}

impl AvPair {
    pub fn new(attr: impl Into<String>, value: impl Into<String>) -> Self {
        AvPair {
            attr: attr.into(),
            value: value.into(),
        }
    }
}

impl fmt::Display for AvPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.attr, self.value)
    }
}

/// Dense index of an attribute inside its space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttrId(pub u32);

/// Dense index of an (attribute, value) assignment. Every value of every
/// domain gets one id, so hot paths can compare integers instead of strings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairId(pub u32);

#[derive(Serialize, Deserialize)]
struct SpaceDocument {
    attributes: Vec<RawDef>,
}

#[derive(Serialize, Deserialize)]
struct RawDef {
    name: String,
    class: String,
    #[serde(default = "default_weight")]
    initial_weight: f64,
    domain: Vec<String>,
}

fn default_weight() -> f64 {
    1.0
}

/// The validated attribute space with interned value ids.
#[derive(Clone, Debug)]
pub struct AttributeSpace {
    defs: Vec<AttributeDef>,
    by_name: HashMap<String, AttrId>,
    values: Vec<HashMap<String, u32>>,
    offsets: Vec<u32>,
    pair_attr: Vec<AttrId>,
}

impl AttributeSpace {
    pub fn new(defs: Vec<AttributeDef>) -> Result<Self> {
        let mut by_name = HashMap::with_capacity(defs.len());
        let mut values = Vec::with_capacity(defs.len());
        let mut offsets = Vec::with_capacity(defs.len());
        let mut pair_attr = Vec::new();
        for (i, def) in defs.iter().enumerate() {
            if by_name.insert(def.name.clone(), AttrId(i as u32)).is_some() {
                return Err(Error::DuplicateAttribute(def.name.clone()));
            }
            if def.domain.is_empty() {
                return Err(Error::EmptyDomain(def.name.clone()));
            }
            if def.initial_weight < 0.0 || !def.initial_weight.is_finite() {
                return Err(Error::SpaceDocument(format!(
                    "attribute `{}` has invalid initial weight {}",
                    def.name, def.initial_weight
                )));
            }
            let mut index = HashMap::with_capacity(def.domain.len());
            for (j, v) in def.domain.iter().enumerate() {
                if index.insert(v.clone(), j as u32).is_some() {
                    return Err(Error::DuplicateDomainValue {
                        attr: def.name.clone(),
                        value: v.clone(),
                    });
                }
            }
            offsets.push(pair_attr.len() as u32);
            pair_attr.extend(std::iter::repeat_n(AttrId(i as u32), def.domain.len()));
            values.push(index);
        }
        Ok(AttributeSpace {
            defs,
            by_name,
            values,
            offsets,
            pair_attr,
        })
    }

    /// Parses and validates an attribute-space JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpaceDocument =
            serde_json::from_str(text).map_err(|e| Error::SpaceDocument(e.to_string()))?;
        Self::from_document(doc)
    }

    pub(crate) fn from_value(value: serde_json::Value) -> Result<Self> {
        let doc: SpaceDocument =
            serde_json::from_value(value).map_err(|e| Error::SpaceDocument(e.to_string()))?;
        Self::from_document(doc)
    }

    fn from_document(doc: SpaceDocument) -> Result<Self> {
        let defs = doc
            .attributes
            .into_iter()
            .map(|raw| {
                Ok(AttributeDef {
                    class: AttrClass::parse(&raw.class)?,
                    name: raw.name,
                    initial_weight: raw.initial_weight,
                    domain: raw.domain,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(defs)
    }

    pub fn to_value(&self) -> serde_json::Value {
        let doc = SpaceDocument {
            attributes: self
                .defs
                .iter()
                .map(|d| RawDef {
                    name: d.name.clone(),
                    class: d.class.as_str().to_string(),
                    initial_weight: d.initial_weight,
                    domain: d.domain.clone(),
                })
                .collect(),
        };
        serde_json::to_value(doc).expect("space document serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("space document serializes")
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn defs(&self) -> &[AttributeDef] {
        &self.defs
    }

    pub fn def(&self, id: AttrId) -> &AttributeDef {
        &self.defs[id.0 as usize]
    }

    pub fn attr_ids(&self) -> impl Iterator<Item = AttrId> + '_ {
        (0..self.defs.len() as u32).map(AttrId)
    }

    pub fn attr_id(&self, name: &str) -> Option<AttrId> {
        self.by_name.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<AttrId> {
        self.attr_id(name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn class_of(&self, name: &str) -> Result<AttrClass> {
        Ok(self.def(self.require(name)?).class)
    }

    /// The unique operation-class attribute, if the space declares exactly one.
    pub fn operation_attr(&self) -> Option<AttrId> {
        let mut ops = self
            .defs
            .iter()
            .enumerate()
            .filter(|(_, d)| d.class == AttrClass::Operation);
        match (ops.next(), ops.next()) {
            (Some((i, _)), None) => Some(AttrId(i as u32)),
            _ => None,
        }
    }

    pub fn pair_count(&self) -> usize {
        self.pair_attr.len()
    }

    pub fn pair_id(&self, attr: &str, value: &str) -> Result<PairId> {
        let id = self.require(attr)?;
        self.values[id.0 as usize]
            .get(value)
            .map(|&j| PairId(self.offsets[id.0 as usize] + j))
            .ok_or_else(|| Error::OutOfDomain {
                attr: attr.to_string(),
                value: value.to_string(),
            })
    }

    pub fn attr_of(&self, pair: PairId) -> AttrId {
        self.pair_attr[pair.0 as usize]
    }

    pub fn pair(&self, pair: PairId) -> (&str, &str) {
        let attr = self.attr_of(pair);
        let def = self.def(attr);
        let j = pair.0 - self.offsets[attr.0 as usize];
        (&def.name, &def.domain[j as usize])
    }

    pub fn av_pair(&self, pair: PairId) -> AvPair {
        let (a, v) = self.pair(pair);
        AvPair::new(a, v)
    }

    /// All pair ids of one attribute, in domain order.
    pub fn pairs_of(&self, attr: AttrId) -> impl Iterator<Item = PairId> {
        let start = self.offsets[attr.0 as usize];
        let n = self.defs[attr.0 as usize].domain.len() as u32;
        (start..start + n).map(PairId)
    }

    /// Validates a pair map against the space, optionally restricting the
    /// attribute class, and returns the interned ids in ascending order.
    pub fn intern_map(
        &self,
        pairs: &BTreeMap<String, String>,
        class: Option<AttrClass>,
    ) -> Result<Vec<PairId>> {
        let mut ids = Vec::with_capacity(pairs.len());
        for (a, v) in pairs {
            if let Some(expected) = class {
                let found = self.class_of(a)?;
                if found != expected {
                    return Err(Error::WrongClass {
                        attr: a.clone(),
                        expected: expected.as_str(),
                        found: found.as_str(),
                    });
                }
            }
            ids.push(self.pair_id(a, v)?);
        }
        ids.sort_unstable();
        Ok(ids)
    }

    /// Like [`intern_map`](Self::intern_map) for a pair list, rejecting repeated attributes.
    pub fn intern_list(
        &self,
        pairs: &[AvPair],
        class: Option<AttrClass>,
    ) -> Result<BTreeMap<String, String>> {
        let mut seen = HashSet::with_capacity(pairs.len());
        let mut map = BTreeMap::new();
        for p in pairs {
            if !seen.insert(p.attr.as_str()) {
                return Err(Error::DuplicatePair(p.attr.clone()));
            }
            map.insert(p.attr.clone(), p.value.clone());
        }
        self.intern_map(&map, class)?;
        Ok(map)
    }
}
