use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::{EmbeddingStore, EvalSpec};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// `1 - cos(u, v)`, clamped to `[0, 2]`.
pub fn cosine_distance<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::Dim { expected: u.len(), got: v.len() });
    }
    let nu = linalg::norm(u);
    let nv = linalg::norm(v);
    if nu == T::zero() || nv == T::zero() {
        return Err(Error::ZeroNorm);
    }
    let d = T::one() - linalg::dot(u, v) / (nu * nv);
    Ok(d.max(T::zero()).min(T::lit(2.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacResult<T> {
    pub mac: T,
    /// `distances[i][j]`: mean cosine distance from target `i` to attribute set `j`.
    pub distances: Vec<Vec<T>>,
    pub targets: Vec<String>,
    /// Indices (into the eval spec) of the attribute sets that were kept.
    pub attribute_sets: Vec<usize>,
    pub skipped_targets: Vec<String>,
    pub skipped_attributes: Vec<String>,
    pub dropped_sets: Vec<usize>,
}

impl<T: Scalar> MacResult<T> {
    /// Row-major flattening, the pairing order used by the t-test.
    pub fn flat_distances(&self) -> Vec<f64> {
        self.distances.iter().flatten().map(|x| x.to_f64_lossy()).collect()
    }
}

/// Mean average cosine distance between targets and attribute sets.
///
/// Out-of-vocabulary words are skipped and reported; an attribute set with
/// no resolvable word is dropped.
pub fn mac<T: Scalar>(store: &EmbeddingStore<T>, eval: &EvalSpec) -> Result<MacResult<T>> {
    let targets = store.resolve_words(&eval.targets);
    if targets.found.is_empty() {
        return Err(Error::Empty("every MAC target is out of vocabulary".into()));
    }
    let mut sets = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut skipped_attributes = Vec::new();
    for (j, set) in eval.attribute_sets.iter().enumerate() {
        let r = store.resolve_words(set);
        skipped_attributes.extend(r.missing);
        if r.found.is_empty() {
            log::warn!("attribute set {j} is entirely out of vocabulary; dropped");
            dropped.push(j);
        } else {
            kept.push(j);
            sets.push(r.found.into_iter().map(|(_, v)| v).collect::<Vec<_>>());
        }
    }
    if sets.is_empty() {
        return Err(Error::Empty("every MAC attribute set is out of vocabulary".into()));
    }
    let target_vecs: Vec<Vec<T>> = targets.found.iter().map(|(_, v)| v.clone()).collect();
    let mut result = mac_from_vectors(&target_vecs, &sets)?;
    result.targets = targets.found.into_iter().map(|(w, _)| w).collect();
    result.attribute_sets = kept;
    result.skipped_targets = targets.missing;
    result.skipped_attributes = skipped_attributes;
    result.dropped_sets = dropped;
    Ok(result)
}

/// MAC over raw vectors. Sums run in index order, so results do not depend
/// on the worker count.
pub fn mac_from_vectors<T: Scalar>(targets: &[Vec<T>], attribute_sets: &[Vec<Vec<T>>]) -> Result<MacResult<T>> {
    if targets.is_empty() || attribute_sets.is_empty() || attribute_sets.iter().any(Vec::is_empty) {
        return Err(Error::Empty("MAC needs at least one target and non-empty attribute sets".into()));
    }
    let distances = targets
        .par_iter()
        .map(|s| {
            attribute_sets
                .iter()
                .map(|set| {
                    let mut acc = T::zero();
                    for a in set {
                        acc += cosine_distance(s, a)?;
                    }
                    Ok(acc / T::from_usize(set.len()).expect("set size"))
                })
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<Vec<Vec<T>>>>()?;
    let cells = T::from_usize(targets.len() * attribute_sets.len()).expect("cell count");
    let mut total = T::zero();
    for row in &distances {
        for &f in row {
            total += f;
        }
    }
    Ok(MacResult {
        mac: total / cells,
        distances,
        targets: Vec::new(),
        attribute_sets: (0..attribute_sets.len()).collect(),
        skipped_targets: Vec::new(),
        skipped_attributes: Vec::new(),
        dropped_sets: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cosine_distance_extremes() {
        assert_abs_diff_eq!(cosine_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cosine_distance(&[1.0, 2.0], &[-1.0, -2.0]).unwrap(), 2.0, epsilon = 1e-15);
        assert!(matches!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroNorm)));
    }

    fn store() -> EmbeddingStore<f64> {
        EmbeddingStore::new(
            vec!["s".into(), "a".into(), "b".into()],
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn mac_self_is_zero() {
        let e = EvalSpec::new(vec!["s".into()], vec![vec!["s".into()]]).unwrap();
        assert_eq!(mac(&store(), &e).unwrap().mac, 0.0);
    }

    #[test]
    fn mac_averages_zero_and_two() {
        let e = EvalSpec::new(vec!["s".into()], vec![vec!["a".into(), "b".into()]]).unwrap();
        let r = mac(&store(), &e).unwrap();
        assert_abs_diff_eq!(r.distances[0][0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.mac, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mac_oov_policy() {
        let e = EvalSpec::new(
            vec!["s".into(), "zz".into()],
            vec![vec!["nope".into()], vec!["a".into(), "q".into()]],
        )
        .unwrap();
        let r = mac(&store(), &e).unwrap();
        assert_eq!(r.skipped_targets, vec!["zz"]);
        assert_eq!(r.dropped_sets, vec![0]);
        assert_eq!(r.attribute_sets, vec![1]);
        assert_eq!(r.skipped_attributes, vec!["nope", "q"]);

        let all_oov = EvalSpec::new(vec!["zz".into()], vec![vec!["a".into()]]).unwrap();
        assert!(mac(&store(), &all_oov).is_err());
        let no_sets = EvalSpec::new(vec!["s".into()], vec![vec!["q".into()]]).unwrap();
        assert!(mac(&store(), &no_sets).is_err());
    }
}
