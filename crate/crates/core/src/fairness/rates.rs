//! Error rates per group and identity, and the equality differences built
//! on them.
//!
//! The individual metric sums `|FNR - FNR_G|` over groups against the
//! global rate. The joint metric pairs each group only with its own
//! identity: the reference is the rate over rows belonging to any group of
//! that identity.

use serde::Serialize;

use super::dataset::{GroupKey, LabeledDataset};
use crate::error::{Error, Result};
use crate::scalar::RateScalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn add(&mut self, label: bool, predicted: bool) {
        match (label, predicted) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.fp + self.tn
    }

    /// `FN / (FN + TP)`, undefined without positives.
    pub fn fnr<T: RateScalar>(&self) -> Option<T> {
        (self.positives() > 0).then(|| T::from_count(self.fn_) / T::from_count(self.positives()))
    }

    /// `FP / (FP + TN)`, undefined without negatives.
    pub fn fpr<T: RateScalar>(&self) -> Option<T> {
        (self.negatives() > 0).then(|| T::from_count(self.fp) / T::from_count(self.negatives()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRates<T> {
    pub key: GroupKey,
    pub confusion: Confusion,
    pub fnr: Option<T>,
    pub fpr: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityRates<T> {
    pub identity: String,
    /// Over rows in any group of this identity.
    pub confusion: Confusion,
    pub fnr: Option<T>,
    pub fpr: Option<T>,
    pub groups: Vec<GroupRates<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTable<T> {
    pub overall: Confusion,
    pub fnr: Option<T>,
    pub fpr: Option<T>,
    pub identities: Vec<IdentityRates<T>>,
    pub warnings: Vec<String>,
}

impl<T: RateScalar> RateTable<T> {
    pub fn groups(&self) -> impl Iterator<Item = &GroupRates<T>> {
        self.identities.iter().flat_map(|i| i.groups.iter())
    }
}

/// FNR/FPR overall, per group and per identity population.
pub fn compute_rates<T: RateScalar>(predictions: &[bool], dataset: &LabeledDataset) -> Result<RateTable<T>> {
    if predictions.len() != dataset.len() {
        return Err(Error::Dim {
            expected: dataset.len(),
            got: predictions.len(),
        });
    }
    let mut overall = Confusion::default();
    let mut per_group = vec![Confusion::default(); dataset.groups.len()];
    let identities = dataset.identities();
    let members: Vec<Vec<usize>> = identities.iter().map(|i| dataset.groups_of(i)).collect();
    let mut per_identity = vec![Confusion::default(); identities.len()];

    for (r, (&y, &p)) in dataset.labels.iter().zip(predictions).enumerate() {
        overall.add(y, p);
        for (g, c) in per_group.iter_mut().enumerate() {
            if dataset.is_member(r, g) {
                c.add(y, p);
            }
        }
        for (t, groups) in members.iter().enumerate() {
            if dataset.in_any(r, groups) {
                per_identity[t].add(y, p);
            }
        }
    }

    let mut warnings = Vec::new();
    let mut check = |name: &str, c: &Confusion| {
        if c.positives() == 0 {
            warnings.push(format!("{name}: no positive rows, FNR undefined"));
        }
        if c.negatives() == 0 {
            warnings.push(format!("{name}: no negative rows, FPR undefined"));
        }
    };
    check("overall", &overall);
    for (t, id) in identities.iter().enumerate() {
        check(id, &per_identity[t]);
        for &g in &members[t] {
            check(&dataset.groups[g].to_string(), &per_group[g]);
        }
    }

    let identities = identities
        .into_iter()
        .zip(members)
        .zip(per_identity)
        .map(|((identity, groups), confusion)| IdentityRates {
            identity,
            fnr: confusion.fnr(),
            fpr: confusion.fpr(),
            confusion,
            groups: groups
                .into_iter()
                .map(|g| GroupRates {
                    key: dataset.groups[g].clone(),
                    confusion: per_group[g],
                    fnr: per_group[g].fnr(),
                    fpr: per_group[g].fpr(),
                })
                .collect(),
        })
        .collect();

    Ok(RateTable {
        overall,
        fnr: overall.fnr(),
        fpr: overall.fpr(),
        identities,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityDifferences<T> {
    pub identity: String,
    pub fned: T,
    pub fped: T,
    pub total: T,
}

/// FNED/FPED summed over groups, with a per-identity breakdown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EqualityDifferences<T> {
    pub fned: T,
    pub fped: T,
    pub total: T,
    pub per_identity: Vec<IdentityDifferences<T>>,
    /// Groups skipped because a rate (or its reference) was undefined.
    pub excluded: Vec<String>,
}

fn abs_dev<T: RateScalar>(reference: &Option<T>, rate: &Option<T>) -> Option<T> {
    match (reference, rate) {
        (Some(r), Some(g)) => Some((r.clone() - g.clone()).abs()),
        _ => None,
    }
}

fn differences<T: RateScalar>(
    table: &RateTable<T>,
    reference: impl Fn(&IdentityRates<T>) -> (Option<T>, Option<T>),
) -> EqualityDifferences<T> {
    let mut out = EqualityDifferences {
        fned: T::zero(),
        fped: T::zero(),
        total: T::zero(),
        per_identity: Vec::new(),
        excluded: Vec::new(),
    };
    for id in &table.identities {
        let (ref_fnr, ref_fpr) = reference(id);
        let (mut fned, mut fped) = (T::zero(), T::zero());
        for g in &id.groups {
            match abs_dev(&ref_fnr, &g.fnr) {
                Some(d) => fned = fned + d,
                None => out.excluded.push(format!("{} (FNR)", g.key)),
            }
            match abs_dev(&ref_fpr, &g.fpr) {
                Some(d) => fped = fped + d,
                None => out.excluded.push(format!("{} (FPR)", g.key)),
            }
        }
        out.fned = out.fned + fned.clone();
        out.fped = out.fped + fped.clone();
        out.per_identity.push(IdentityDifferences {
            identity: id.identity.clone(),
            total: fned.clone() + fped.clone(),
            fned,
            fped,
        });
    }
    out.total = out.fned.clone() + out.fped.clone();
    out
}

/// Individual metric: every group against the global FNR/FPR.
pub fn individual_bias<T: RateScalar>(table: &RateTable<T>) -> EqualityDifferences<T> {
    differences(table, |_| (table.fnr.clone(), table.fpr.clone()))
}

/// Joint metric: every group against its own identity's FNR/FPR.
pub fn joint_bias<T: RateScalar>(table: &RateTable<T>) -> EqualityDifferences<T> {
    differences(table, |id| (id.fnr.clone(), id.fpr.clone()))
}

/// Everything reported for one set of predictions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport<T> {
    pub threshold: f64,
    pub rates: RateTable<T>,
    pub individual: EqualityDifferences<T>,
    pub joint: EqualityDifferences<T>,
    pub accuracy: T,
    pub f1: T,
    pub auc: Option<f64>,
}

impl<T: RateScalar> BiasReport<T> {
    pub fn from_predictions(
        predictions: &[bool],
        dataset: &LabeledDataset,
        threshold: f64,
        auc: Option<f64>,
    ) -> Result<Self> {
        let rates = compute_rates::<T>(predictions, dataset)?;
        let c = rates.overall;
        let n = c.tp + c.fn_ + c.fp + c.tn;
        let accuracy = if n == 0 {
            T::zero()
        } else {
            T::from_count(c.tp + c.tn) / T::from_count(n)
        };
        let denom = 2 * c.tp + c.fp + c.fn_;
        let f1 = if denom == 0 {
            T::zero()
        } else {
            T::from_count(2 * c.tp) / T::from_count(denom)
        };
        Ok(BiasReport {
            threshold,
            individual: individual_bias(&rates),
            joint: joint_bias(&rates),
            rates,
            accuracy,
            f1,
            auc,
        })
    }
}

/// Area under the ROC curve by the rank-sum statistic (ties averaged).
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum += avg_rank;
            }
        }
        i = j + 1;
    }
    let p = pos as f64;
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use num_traits::Signed;

    type Q = Ratio<i64>;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n, d)
    }

    /// Ten rows, gender only: male rows 0..4, female rows 4..8, rows 8,9 unaffiliated.
    fn gender_dataset() -> LabeledDataset {
        let labels = vec![true, true, false, false, true, true, false, false, true, true];
        let groups = vec![GroupKey::new("gender", "male"), GroupKey::new("gender", "female")];
        let mut m = Vec::new();
        for r in 0..10 {
            m.push(r < 4);
            m.push((4..8).contains(&r));
        }
        LabeledDataset::new(
            (0..10).map(|i| i.to_string()).collect(),
            labels,
            groups,
            m,
            vec![0.0; 10],
            1,
        )
        .unwrap()
    }

    #[test]
    fn perfect_predictions_have_zero_bias() {
        let d = gender_dataset();
        let r = BiasReport::<f64>::from_predictions(&d.labels, &d, 0.5, None).unwrap();
        assert_eq!(r.rates.fnr, Some(0.0));
        assert_eq!(r.individual.total, 0.0);
        assert_eq!(r.joint.total, 0.0);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.f1, 1.0);
    }

    #[test]
    fn hand_counted_fned() {
        // Positives: male {0,1}, female {4,5}, unaffiliated {8,9}. Miss row 0.
        let d = gender_dataset();
        let mut p = d.labels.clone();
        p[0] = false; // male FN
        let t = compute_rates::<Q>(&p, &d).unwrap();
        assert_eq!(t.fnr, Some(q(1, 6)));
        let g = &t.identities[0];
        assert_eq!(g.groups[0].fnr, Some(q(1, 2)));
        assert_eq!(g.groups[1].fnr, Some(q(0, 1)));
        assert_eq!(g.fnr, Some(q(1, 4)));
        let ind = individual_bias(&t);
        assert_eq!(ind.fned, (q(1, 6) - q(1, 2)).abs() + q(1, 6));
        let joint = joint_bias(&t);
        assert_eq!(joint.fned, q(1, 4) + q(1, 4));
        assert_eq!(joint.fped, q(0, 1));
    }

    #[test]
    fn spec_fned_half() {
        // 2 gender groups with FNRs {0.5, 0.0} and overall 0.25 -> FNED = 0.5.
        let labels = vec![true, true, true, true, false, false, false, false, false, false];
        let groups = vec![GroupKey::new("gender", "male"), GroupKey::new("gender", "female")];
        let member = |r: usize| (r.is_multiple_of(2), !r.is_multiple_of(2));
        let m: Vec<bool> = (0..10).flat_map(|r| [member(r).0, member(r).1]).collect();
        let d = LabeledDataset::new(
            (0..10).map(|i| i.to_string()).collect(),
            labels.clone(),
            groups,
            m,
            vec![0.0; 10],
            1,
        )
        .unwrap();
        let mut p = labels;
        p[0] = false; // male positive missed: male positives {0,2}, female {1,3}
        let t = compute_rates::<Q>(&p, &d).unwrap();
        assert_eq!(t.fnr, Some(q(1, 4)));
        assert_eq!(individual_bias(&t).fned, q(1, 2));
    }

    #[test]
    fn undefined_rates_are_excluded() {
        let labels = vec![true, true, false];
        let groups = vec![GroupKey::new("g", "a")];
        let d = LabeledDataset::new(
            vec!["0".into(), "1".into(), "2".into()],
            labels,
            groups,
            vec![true, true, false],
            vec![0.0; 3],
            1,
        )
        .unwrap();
        let t = compute_rates::<f64>(&[true, false, false], &d).unwrap();
        assert_eq!(t.identities[0].groups[0].fpr, None);
        assert!(t.warnings.iter().any(|w| w.contains("g:a")));
        let e = individual_bias(&t);
        assert_eq!(e.excluded, vec!["g:a (FPR)"]);
        assert!(compute_rates::<f64>(&[true], &d).is_err());
    }

    #[test]
    fn auc_values() {
        assert_eq!(auc(&[0.1, 0.9], &[false, true]), Some(1.0));
        assert_eq!(auc(&[0.9, 0.1], &[false, true]), Some(0.0));
        assert_eq!(auc(&[0.5, 0.5], &[false, true]), Some(0.5));
        assert_eq!(auc(&[0.5], &[true]), None);
    }
}
