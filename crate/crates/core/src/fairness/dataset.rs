use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(identity, group)`, written `identity:group` in CSV headers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub identity: String,
    pub group: String,
}

impl GroupKey {
    pub fn new(identity: impl Into<String>, group: impl Into<String>) -> Self {
        GroupKey {
            identity: identity.into(),
            group: group.into(),
        }
    }

    pub fn parse(s: &str) -> Option<GroupKey> {
        let (i, g) = s.split_once(':')?;
        if i.is_empty() || g.is_empty() {
            return None;
        }
        Some(GroupKey::new(i, g))
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.identity, self.group)
    }
}

/// Rows of features, a binary toxicity label and group memberships.
///
/// A row may belong to any number of groups, within and across identities.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub ids: Vec<String>,
    pub labels: Vec<bool>,
    pub groups: Vec<GroupKey>,
    /// Row-major `len() x groups.len()`.
    memberships: Vec<bool>,
    /// Row-major `len() x dim`.
    features: Vec<f64>,
    dim: usize,
}

impl LabeledDataset {
    pub fn new(
        ids: Vec<String>,
        labels: Vec<bool>,
        groups: Vec<GroupKey>,
        memberships: Vec<bool>,
        features: Vec<f64>,
        dim: usize,
    ) -> Result<Self> {
        let n = labels.len();
        if ids.len() != n || memberships.len() != n * groups.len() || features.len() != n * dim {
            return Err(Error::Dataset("column lengths disagree".into()));
        }
        let unique: BTreeSet<&GroupKey> = groups.iter().collect();
        if unique.len() != groups.len() {
            return Err(Error::Dataset("duplicate group column".into()));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::Dataset("non-finite feature value".into()));
        }
        Ok(LabeledDataset {
            ids,
            labels,
            groups,
            memberships,
            features,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self, row: usize) -> &[f64] {
        &self.features[row * self.dim..(row + 1) * self.dim]
    }

    pub fn is_member(&self, row: usize, group: usize) -> bool {
        self.memberships[row * self.groups.len() + group]
    }

    pub fn group_index(&self, key: &GroupKey) -> Option<usize> {
        self.groups.iter().position(|g| g == key)
    }

    /// Identity names in order of first appearance among the group columns.
    pub fn identities(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for g in &self.groups {
            if !out.contains(&g.identity) {
                out.push(g.identity.clone());
            }
        }
        out
    }

    pub fn groups_of(&self, identity: &str) -> Vec<usize> {
        (0..self.groups.len())
            .filter(|&g| self.groups[g].identity == identity)
            .collect()
    }

    /// Whether `row` belongs to any group in `groups`.
    pub fn in_any(&self, row: usize, groups: &[usize]) -> bool {
        groups.iter().any(|&g| self.is_member(row, g))
    }

    pub fn subset(&self, rows: &[usize]) -> LabeledDataset {
        let g = self.groups.len();
        LabeledDataset {
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            groups: self.groups.clone(),
            memberships: rows
                .iter()
                .flat_map(|&r| self.memberships[r * g..(r + 1) * g].iter().copied())
                .collect(),
            features: rows.iter().flat_map(|&r| self.features(r).iter().copied()).collect(),
            dim: self.dim,
        }
    }

    /// Seeded shuffle split into `(train, test)`.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::InvalidArgument(format!(
                "test fraction {test_fraction} must be in [0, 1)"
            )));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = (self.len() as f64 * test_fraction).round() as usize;
        let (test, train) = idx.split_at(n_test);
        let mut train = train.to_vec();
        let mut test = test.to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train), self.subset(&test)))
    }

    /// Reads `id,label,<identity>:<group>...,f0..f{d-1}`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("id") || header.get(1) != Some("label") {
            return Err(Error::Dataset("header must start with id,label".into()));
        }
        let mut groups = Vec::new();
        let mut col = 2;
        while let Some(key) = header.get(col).and_then(GroupKey::parse) {
            groups.push(key);
            col += 1;
        }
        let feature_start = col;
        for (j, name) in header.iter().skip(feature_start).enumerate() {
            if name != format!("f{j}") {
                return Err(Error::Dataset(format!(
                    "column {} must be f{j} (got {name:?})",
                    feature_start + j
                )));
            }
        }
        let dim = header.len() - feature_start;

        let (mut ids, mut labels, mut memberships, mut features) = (vec![], vec![], vec![], vec![]);
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = r + 2;
            ids.push(rec[0].to_string());
            labels.push(parse_flag(&rec[1], line, "label")?);
            for c in 2..feature_start {
                memberships.push(parse_flag(&rec[c], line, &header[c])?);
            }
            for c in feature_start..rec.len() {
                let v: f64 = rec[c]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Dataset(format!("line {line}: bad feature value {:?}", &rec[c])))?;
                features.push(v);
            }
        }
        LabeledDataset::new(ids, labels, groups, memberships, features, dim)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["id".to_string(), "label".to_string()];
        header.extend(self.groups.iter().map(GroupKey::to_string));
        header.extend((0..self.dim).map(|j| format!("f{j}")));
        wr.write_record(&header)?;
        let flag = |b: bool| if b { "1".to_string() } else { "0".to_string() };
        for r in 0..self.len() {
            let mut rec = vec![self.ids[r].clone(), flag(self.labels[r])];
            rec.extend((0..self.groups.len()).map(|g| flag(self.is_member(r, g))));
            rec.extend(self.features(r).iter().map(|x| format!("{x:.16e}")));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn parse_flag(s: &str, line: usize, column: &str) -> Result<bool> {
    match s.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Dataset(format!("line {line}: {column} must be 0 or 1, got {other:?}"))),
    }
}
