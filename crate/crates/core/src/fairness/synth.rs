//! Synthetic identity-annotated toxicity data with planted group bias.
//!
//! Labels are drawn first, then group memberships conditionally on the
//! label so that every group's share and toxicity rate match the spec in
//! expectation. Memberships of different identities are conditionally
//! independent given the label, so rows in several high-toxicity groups are
//! more often toxic than any single group.
//!
//! Features: `signal * (±1) * e0 + bias_strength * sum(u_g) + N(0, I)`,
//! where `e0` is the first axis and each `u_g` is a seeded unit direction
//! orthogonal to it. With `bias_strength = 0` features carry no group
//! information beyond the label.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::{GroupKey, LabeledDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticIdentity {
    pub name: String,
    pub groups: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupRate {
    /// Fraction of all rows in the group.
    pub share: f64,
    /// Fraction of the group's rows labelled toxic.
    pub toxicity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub identities: Vec<SyntheticIdentity>,
    /// Keyed `identity:group`.
    pub group_rates: BTreeMap<String, GroupRate>,
    /// Overall toxicity rate.
    pub base_toxicity: f64,
    pub feature_dim: usize,
    #[serde(default = "default_signal")]
    pub signal: f64,
    pub bias_strength: f64,
    /// Probability of flipping a non-toxic row with memberships in two or
    /// more identities to toxic. Non-zero values shift group marginals.
    #[serde(default)]
    pub intersectional_boost: f64,
    pub size: usize,
}

fn default_signal() -> f64 {
    1.0
}

impl SyntheticSpec {
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    fn group_keys(&self) -> Vec<GroupKey> {
        self.identities
            .iter()
            .flat_map(|i| i.groups.iter().map(move |g| GroupKey::new(&i.name, g)))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.size == 0 {
            return Err(Error::InvalidArgument("size must be at least 1".into()));
        }
        if self.feature_dim < 2 {
            return Err(Error::InvalidArgument("feature_dim must be at least 2".into()));
        }
        if !unit(self.base_toxicity) || !unit(self.intersectional_boost) {
            return Err(Error::InvalidArgument("rates must lie in [0, 1]".into()));
        }
        if !self.signal.is_finite() || !self.bias_strength.is_finite() {
            return Err(Error::InvalidArgument("signal and bias_strength must be finite".into()));
        }
        let keys = self.group_keys();
        for k in self.group_rates.keys() {
            let parsed = GroupKey::parse(k)
                .ok_or_else(|| Error::InvalidArgument(format!("group rate key {k:?} is not identity:group")))?;
            if !keys.contains(&parsed) {
                return Err(Error::InvalidArgument(format!(
                    "group rate {k:?} refers to an undeclared identity or group"
                )));
            }
        }
        for key in &keys {
            let r = self
                .group_rates
                .get(&key.to_string())
                .ok_or_else(|| Error::InvalidArgument(format!("no rate for group {key}")))?;
            if !unit(r.share) || !unit(r.toxicity) {
                return Err(Error::InvalidArgument(format!("group {key}: rates must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// `P(group | label)` per identity, derived from shares and toxicity rates.
fn conditional_tables(spec: &SyntheticSpec) -> Result<Vec<[Vec<f64>; 2]>> {
    let base = spec.base_toxicity;
    let mut tables = Vec::new();
    for id in &spec.identities {
        let mut given_neg = Vec::new();
        let mut given_pos = Vec::new();
        for g in &id.groups {
            let r = spec.group_rates[&format!("{}:{}", id.name, g)];
            given_pos.push(if base > 0.0 { r.share * r.toxicity / base } else { 0.0 });
            given_neg.push(if base < 1.0 {
                r.share * (1.0 - r.toxicity) / (1.0 - base)
            } else {
                0.0
            });
        }
        for (label, t) in [("non-toxic", &given_neg), ("toxic", &given_pos)] {
            let total: f64 = t.iter().sum();
            if total > 1.0 + 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "identity {:?}: group shares and toxicity rates need {:.3} of {label} rows, \
                     more than exist at base toxicity {base}",
                    id.name, total
                )));
            }
        }
        tables.push([given_neg, given_pos]);
    }
    Ok(tables)
}

fn pick(rng: &mut ChaCha8Rng, probs: &[f64]) -> Option<usize> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Some(i);
        }
    }
    None
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    let tables = conditional_tables(spec)?;
    let groups = spec.group_keys();
    let n_groups = groups.len();
    let d = spec.feature_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let directions: Vec<Vec<f64>> = (0..n_groups)
        .map(|_| {
            let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            v[0] = 0.0;
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x / n).collect()
        })
        .collect();

    let offsets: Vec<usize> = spec
        .identities
        .iter()
        .scan(0, |acc, id| {
            let o = *acc;
            *acc += id.groups.len();
            Some(o)
        })
        .collect();

    let mut labels = Vec::with_capacity(spec.size);
    let mut memberships = vec![false; spec.size * n_groups];
    let mut features = Vec::with_capacity(spec.size * d);
    for r in 0..spec.size {
        let mut y = rng.random::<f64>() < spec.base_toxicity;
        let mut touched = 0;
        for (t, table) in tables.iter().enumerate() {
            if let Some(g) = pick(&mut rng, &table[y as usize]) {
                memberships[r * n_groups + offsets[t] + g] = true;
                touched += 1;
            }
        }
        if !y && touched >= 2 && rng.random::<f64>() < spec.intersectional_boost {
            y = true;
        }
        let mut x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        x[0] += spec.signal * if y { 1.0 } else { -1.0 };
        for (g, dir) in directions.iter().enumerate() {
            if memberships[r * n_groups + g] {
                for (xi, di) in x.iter_mut().zip(dir) {
                    *xi += spec.bias_strength * di;
                }
            }
        }
        labels.push(y);
        features.extend(x);
    }

    LabeledDataset::new(
        (0..spec.size).map(|i| i.to_string()).collect(),
        labels,
        groups,
        memberships,
        features,
        d,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gender_spec(size: usize) -> SyntheticSpec {
        SyntheticSpec::from_json(&format!(
            r#"{{"identities":[{{"name":"gender","groups":["male","female"]}}],
                "group_rates":{{"gender:male":{{"share":0.11,"toxicity":0.150}},
                                "gender:female":{{"share":0.132,"toxicity":0.137}}}},
                "base_toxicity":0.114,"feature_dim":4,"bias_strength":1.0,"size":{size}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn marginals_match_spec() {
        let spec = gender_spec(20_000);
        let d = generate_synthetic(&spec, 7).unwrap();
        for (g, (share, tox)) in [(0usize, (0.11, 0.150)), (1, (0.132, 0.137))] {
            let rows: Vec<usize> = (0..d.len()).filter(|&r| d.is_member(r, g)).collect();
            let emp_share = rows.len() as f64 / d.len() as f64;
            let emp_tox = rows.iter().filter(|&&r| d.labels[r]).count() as f64 / rows.len() as f64;
            assert!((emp_share - share).abs() < 0.02, "share {emp_share}");
            assert!((emp_tox - tox).abs() < 0.02, "toxicity {emp_tox}");
        }
    }

    #[test]
    fn seeded() {
        let spec = gender_spec(500);
        assert_eq!(generate_synthetic(&spec, 3).unwrap(), generate_synthetic(&spec, 3).unwrap());
        assert_ne!(generate_synthetic(&spec, 3).unwrap(), generate_synthetic(&spec, 4).unwrap());
    }

    #[test]
    fn inconsistent_specs() {
        let mut spec = gender_spec(10);
        spec.group_rates.insert("race:black".into(), GroupRate { share: 0.1, toxicity: 0.3 });
        assert!(generate_synthetic(&spec, 0).is_err());

        let mut spec = gender_spec(10);
        spec.group_rates.remove("gender:male");
        assert!(generate_synthetic(&spec, 0).is_err());

        // Toxic rows cannot all be male if males are a minority with 90% toxicity at 1% base.
        let mut spec = gender_spec(10);
        spec.base_toxicity = 0.01;
        spec.group_rates.insert("gender:male".into(), GroupRate { share: 0.5, toxicity: 0.9 });
        assert!(generate_synthetic(&spec, 0).is_err());

        let mut spec = gender_spec(10);
        spec.size = 0;
        assert!(generate_synthetic(&spec, 0).is_err());
    }
}
