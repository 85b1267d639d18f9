//! Identity taxonomies and evaluation word lists.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::store::normalize_token;
use crate::error::{Error, Result};

/// One social identity (e.g. gender) and its lexicons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identity {
    pub name: String,
    pub groups: Vec<String>,
    pub defining_sets: Vec<Vec<String>>,
    /// Defaults to `defining_sets` when absent from the file.
    pub equality_sets: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityTaxonomy {
    pub identities: Vec<Identity>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTaxonomy {
    identities: Vec<RawIdentity>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIdentity {
    name: String,
    #[serde(default)]
    groups: Vec<String>,
    defining_sets: Vec<Vec<String>>,
    equality_sets: Option<Vec<Vec<String>>>,
}

fn canon_sets(sets: Vec<Vec<String>>) -> Vec<Vec<String>> {
    sets.into_iter()
        .map(|s| s.iter().map(|w| normalize_token(w)).collect())
        .collect()
}

impl IdentityTaxonomy {
    pub fn from_json(json: &str) -> Result<Self> {
        let raw: RawTaxonomy =
            serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))?;
        Self::validated(
            raw.identities
                .into_iter()
                .map(|r| {
                    let defining_sets = canon_sets(r.defining_sets);
                    Identity {
                        name: r.name,
                        groups: r.groups,
                        equality_sets: r
                            .equality_sets
                            .map(canon_sets)
                            .unwrap_or_else(|| defining_sets.clone()),
                        defining_sets,
                    }
                })
                .collect(),
        )
    }

    pub fn validated(identities: Vec<Identity>) -> Result<Self> {
        if identities.is_empty() {
            return Err(Error::Schema("identity list is empty".into()));
        }
        let mut names = HashSet::new();
        for id in &identities {
            if !names.insert(id.name.as_str()) {
                return Err(Error::DuplicateIdentity(id.name.clone()));
            }
            if id.defining_sets.is_empty() {
                return Err(Error::Schema(format!("identity {:?} has no defining sets", id.name)));
            }
            for (i, set) in id.defining_sets.iter().enumerate() {
                if set.len() < 2 {
                    return Err(Error::Schema(format!(
                        "identity {:?}: defining set {i} has {} word(s), need at least 2",
                        id.name,
                        set.len()
                    )));
                }
            }
            for (i, set) in id.equality_sets.iter().enumerate() {
                if set.len() < 2 {
                    return Err(Error::Schema(format!(
                        "identity {:?}: equality set {i} has {} word(s), need at least 2",
                        id.name,
                        set.len()
                    )));
                }
            }
        }
        Ok(IdentityTaxonomy { identities })
    }

    pub fn identity(&self, name: &str) -> Result<&Identity> {
        self.identities
            .iter()
            .find(|i| i.name == name)
            .ok_or_else(|| Error::UnknownIdentity(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.identities.iter().map(|i| i.name.as_str())
    }
}

pub fn load_taxonomy(path: &Path) -> Result<IdentityTaxonomy> {
    let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    IdentityTaxonomy::from_json(&json)
}

/// Target words and attribute sets for a MAC evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    pub targets: Vec<String>,
    pub attribute_sets: Vec<Vec<String>>,
}

impl EvalSpec {
    pub fn new(targets: Vec<String>, attribute_sets: Vec<Vec<String>>) -> Result<Self> {
        let spec = EvalSpec {
            targets: targets.iter().map(|w| normalize_token(w)).collect(),
            attribute_sets: canon_sets(attribute_sets),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let raw: EvalSpec = serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))?;
        EvalSpec::new(raw.targets, raw.attribute_sets)
    }

    fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::Schema("targets must be non-empty".into()));
        }
        if self.attribute_sets.is_empty() {
            return Err(Error::Schema("attribute_sets must be non-empty".into()));
        }
        if let Some(i) = self.attribute_sets.iter().position(Vec::is_empty) {
            return Err(Error::Schema(format!("attribute set {i} is empty")));
        }
        Ok(())
    }
}

pub fn load_eval_spec(path: &Path) -> Result<EvalSpec> {
    let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EvalSpec::from_json(&json)
}
