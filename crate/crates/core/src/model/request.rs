use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crypto::SignedCredential;
use crate::error::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AccessRequest {
    pub seq: u64,
    pub signed_credential: SignedCredential,
    pub object_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub env: BTreeMap<String, String>,
}

/// A conjunction of attribute constraints.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyRule {
    pub id: String,
    #[serde(rename = "attrs")]
    pub constraints: BTreeMap<String, String>,
}

impl PolicyRule {
    pub fn new<A: Into<String>, V: Into<String>>(
        id: impl Into<String>,
        constraints: impl IntoIterator<Item = (A, V)>,
    ) -> Self {
        PolicyRule {
            id: id.into(),
            constraints: constraints
                .into_iter()
                .map(|(a, v)| (a.into(), v.into()))
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Outcome {
    Grant,
    Deny,
}

/// Why a decision came out the way it did.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    Granted,
    BadSignature,
    LowAnonymity,
    NoPath,
    IncompletePath,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Granted => "granted",
            Reason::BadSignature => "bad-signature",
            Reason::LowAnonymity => "low-anonymity",
            Reason::NoPath => "no-path",
            Reason::IncompletePath => "incomplete-path",
        }
    }

    pub fn outcome(self) -> Outcome {
        match self {
            Reason::Granted => Outcome::Grant,
            _ => Outcome::Deny,
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Reason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "granted" => Reason::Granted,
            "bad-signature" => Reason::BadSignature,
            "low-anonymity" => Reason::LowAnonymity,
            "no-path" => Reason::NoPath,
            "incomplete-path" => Reason::IncompletePath,
            other => return Err(Error::InvalidArgument(format!("unknown reason `{other}`"))),
        })
    }
}
