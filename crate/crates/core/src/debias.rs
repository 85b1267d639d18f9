//! Hard debiasing: neutralise neutral words, equalise equality sets.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingStore, IdentityTaxonomy};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;
use crate::subspace::{self, identify_subspace, join_subspaces, BiasSubspace, SubspaceExport};

/// Norm below which a vector's off-subspace (or in-subspace) part is treated as zero.
pub const DEGENERATE_TOL: f64 = 1e-10;

/// Removes the subspace component of `w` and renormalises.
///
/// Returns `None` when `w` lies (numerically) inside the subspace.
pub fn neutralize<T: Scalar>(w: &[T], basis: &[Vec<T>]) -> Option<Vec<T>> {
    let wb = subspace::project_unchecked(w, basis);
    let mut out = linalg::sub(w, &wb);
    let n = linalg::norm(&out);
    if n <= T::lit(DEGENERATE_TOL) {
        return None;
    }
    linalg::scale(T::one() / n, &mut out);
    Some(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equalized<T> {
    pub vectors: Vec<Vec<T>>,
    /// `|mu - mu_B| > 1` forced the square-root argument to zero.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqualizeSkip {
    /// Fewer than two members.
    TooFew,
    /// Member `i`'s bias component coincides with the set mean's.
    Degenerate(usize),
}

/// Equalises an equality set against an orthonormal basis.
///
/// Every output shares the set mean's off-subspace part `mu - mu_B`, so all
/// members end up equidistant from any vector orthogonal to the subspace,
/// and each is rescaled inside the subspace to unit total norm.
pub fn equalize<T: Scalar>(set: &[&[T]], basis: &[Vec<T>]) -> Result<Equalized<T>, EqualizeSkip> {
    if set.len() < 2 {
        return Err(EqualizeSkip::TooFew);
    }
    let mu = linalg::mean(set);
    let mu_b = subspace::project_unchecked(&mu, basis);
    let nu = linalg::sub(&mu, &mu_b);
    let nu_sq = linalg::dot(&nu, &nu);
    let clamped = nu_sq > T::one();
    let radius = (T::one() - nu_sq).max(T::zero()).sqrt();

    let mut vectors = Vec::with_capacity(set.len());
    for (i, w) in set.iter().enumerate() {
        let wb = subspace::project_unchecked(w, basis);
        let dir = linalg::sub(&wb, &mu_b);
        let n = linalg::norm(&dir);
        if n <= T::lit(DEGENERATE_TOL) {
            return Err(EqualizeSkip::Degenerate(i));
        }
        let mut out = nu.clone();
        linalg::axpy(radius / n, &dir, &mut out);
        vectors.push(out);
    }
    Ok(Equalized { vectors, clamped })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "identities", rename_all = "lowercase")]
pub enum DebiasMode {
    Single(String),
    /// Single passes folded in this order, each on the previous output.
    Sequential(Vec<String>),
    /// One pass against the concatenation of all subspaces, identified on the input.
    Joint(Vec<String>),
}

impl DebiasMode {
    pub fn identities(&self) -> Vec<String> {
        match self {
            DebiasMode::Single(id) => vec![id.clone()],
            DebiasMode::Sequential(ids) | DebiasMode::Joint(ids) => ids.clone(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DebiasMode::Single(_) => "single",
            DebiasMode::Sequential(_) => "sequential",
            DebiasMode::Joint(_) => "joint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasPlan {
    pub mode: DebiasMode,
    pub k: usize,
    /// Per-identity overrides of `k`.
    #[serde(default)]
    pub k_overrides: BTreeMap<String, usize>,
}

impl DebiasPlan {
    pub fn new(mode: DebiasMode) -> Self {
        DebiasPlan {
            mode,
            k: subspace::DEFAULT_K,
            k_overrides: BTreeMap::new(),
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn k_for(&self, identity: &str) -> usize {
        self.k_overrides.get(identity).copied().unwrap_or(self.k)
    }

    fn validate(&self, taxonomy: &IdentityTaxonomy) -> Result<()> {
        let ids = self.mode.identities();
        if ids.is_empty() {
            return Err(Error::Empty("debias plan names no identities".into()));
        }
        let mut seen = HashSet::new();
        for id in &ids {
            taxonomy.identity(id)?;
            if !seen.insert(id) {
                return Err(Error::DuplicateIdentity(id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WordStatus {
    Neutralized,
    Equalized,
    SkippedOov,
    SkippedDegenerate,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub neutralized: usize,
    pub equalized: usize,
    pub skipped_oov: usize,
    pub skipped_degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassReport {
    pub identities: Vec<String>,
    pub subspaces: Vec<SubspaceExport>,
    /// Rank of the (orthonormalised) basis actually projected out.
    pub rank: usize,
    pub counts: StatusCounts,
    /// Exactly one entry per vocabulary word.
    pub statuses: BTreeMap<String, WordStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasReport {
    pub mode: String,
    pub order: Vec<String>,
    pub k: BTreeMap<String, usize>,
    pub passes: Vec<PassReport>,
    pub warnings: Vec<String>,
}

/// Runs a debiasing plan and returns the new store with its report.
pub fn hard_debias<T: Scalar>(
    store: &EmbeddingStore<T>,
    taxonomy: &IdentityTaxonomy,
    plan: &DebiasPlan,
) -> Result<(EmbeddingStore<T>, DebiasReport)> {
    plan.validate(taxonomy)?;
    let order = plan.mode.identities();
    let mut report = DebiasReport {
        mode: plan.mode.name().to_string(),
        order: order.clone(),
        k: order.iter().map(|id| (id.clone(), plan.k_for(id))).collect(),
        passes: Vec::new(),
        warnings: Vec::new(),
    };

    let out = match &plan.mode {
        DebiasMode::Single(_) | DebiasMode::Sequential(_) => {
            let mut current = store.clone();
            for id in &order {
                let identity = taxonomy.identity(id)?;
                let sub = identify_subspace(&current, identity, plan.k_for(id))?;
                note_oov(&mut report.warnings, &sub);
                let sets = equality_sets(taxonomy, std::slice::from_ref(id))?;
                let (next, pass) = run_pass(&current, std::slice::from_ref(&sub), &sub.basis, &sets, &mut report.warnings);
                report.passes.push(pass);
                current = next;
            }
            current
        }
        DebiasMode::Joint(_) => {
            let subs = order
                .iter()
                .map(|id| identify_subspace(store, taxonomy.identity(id)?, plan.k_for(id)))
                .collect::<Result<Vec<BiasSubspace<T>>>>()?;
            for s in &subs {
                note_oov(&mut report.warnings, s);
            }
            let joint = join_subspaces(&subs)?;
            let sets = equality_sets(taxonomy, &order)?;
            let (next, pass) = run_pass(store, &subs, &joint.orthonormal, &sets, &mut report.warnings);
            report.passes.push(pass);
            next
        }
    };
    Ok((out, report))
}

fn note_oov<T: Scalar>(warnings: &mut Vec<String>, sub: &BiasSubspace<T>) {
    if !sub.oov.is_empty() {
        warnings.push(format!(
            "identity {:?}: defining words not in vocabulary: {}",
            sub.identity,
            sub.oov.join(", ")
        ));
    }
}

struct EqualitySet {
    identity: String,
    index: usize,
    words: Vec<String>,
}

fn equality_sets(taxonomy: &IdentityTaxonomy, ids: &[String]) -> Result<Vec<EqualitySet>> {
    let mut sets = Vec::new();
    for id in ids {
        for (index, words) in taxonomy.identity(id)?.equality_sets.iter().enumerate() {
            sets.push(EqualitySet {
                identity: id.clone(),
                index,
                words: words.clone(),
            });
        }
    }
    Ok(sets)
}

/// One neutralise/equalise pass against a fixed orthonormal basis.
fn run_pass<T: Scalar>(
    store: &EmbeddingStore<T>,
    subspaces: &[BiasSubspace<T>],
    basis: &[Vec<T>],
    sets: &[EqualitySet],
    warnings: &mut Vec<String>,
) -> (EmbeddingStore<T>, PassReport) {
    let n = store.len();
    let d = store.dim();

    // Equality-set words are never neutralised. Membership counts across
    // sets flag words claimed by more than one set.
    let mut equality_members: HashMap<usize, Vec<(String, usize)>> = HashMap::new();
    for set in sets {
        for w in &set.words {
            if let Some(i) = store.index_of(w) {
                equality_members.entry(i).or_default().push((set.identity.clone(), set.index));
            }
        }
    }

    let neutral: Vec<Option<Option<Vec<T>>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if equality_members.contains_key(&i) {
                None
            } else {
                Some(neutralize(store.row(i), basis))
            }
        })
        .collect();

    let mut matrix = store.matrix().to_vec();
    let mut status = vec![WordStatus::SkippedOov; n];
    let mut degenerate_neutral = 0usize;
    for (i, r) in neutral.into_iter().enumerate() {
        match r {
            Some(Some(v)) => {
                matrix[i * d..(i + 1) * d].copy_from_slice(&v);
                status[i] = WordStatus::Neutralized;
            }
            Some(None) => {
                status[i] = WordStatus::SkippedDegenerate;
                degenerate_neutral += 1;
            }
            None => {}
        }
    }
    if degenerate_neutral > 0 {
        warnings.push(format!(
            "{degenerate_neutral} word(s) lie inside the bias subspace and were left unchanged"
        ));
    }

    let mut shared: Vec<(&usize, &Vec<(String, usize)>)> =
        equality_members.iter().filter(|(_, v)| v.len() > 1).collect();
    shared.sort();
    for (i, owners) in shared {
        let owners: Vec<String> = owners.iter().map(|(id, s)| format!("{id}[{s}]")).collect();
        warnings.push(format!(
            "word {:?} belongs to several equality sets ({}); later sets overwrite earlier ones",
            store.vocab()[*i],
            owners.join(", ")
        ));
    }

    for set in sets {
        let resolved = store.resolve_words(&set.words);
        if !resolved.missing.is_empty() {
            warnings.push(format!(
                "identity {:?} equality set {}: not in vocabulary: {}",
                set.identity,
                set.index,
                resolved.missing.join(", ")
            ));
        }
        let idx: Vec<usize> = resolved
            .words()
            .map(|w| store.index_of(w).expect("resolved word"))
            .collect();
        let members: Vec<Vec<T>> = idx.iter().map(|&i| matrix[i * d..(i + 1) * d].to_vec()).collect();
        let refs: Vec<&[T]> = members.iter().map(Vec::as_slice).collect();
        match equalize(&refs, basis) {
            Ok(eq) => {
                if eq.clamped {
                    warnings.push(format!(
                        "identity {:?} equality set {}: |mu - mu_B| > 1, square root clamped at 0",
                        set.identity, set.index
                    ));
                }
                for (&i, v) in idx.iter().zip(eq.vectors) {
                    matrix[i * d..(i + 1) * d].copy_from_slice(&v);
                    status[i] = WordStatus::Equalized;
                }
            }
            Err(EqualizeSkip::TooFew) => {
                warnings.push(format!(
                    "identity {:?} equality set {}: fewer than 2 words in vocabulary, skipped",
                    set.identity, set.index
                ));
            }
            Err(EqualizeSkip::Degenerate(m)) => {
                warnings.push(format!(
                    "identity {:?} equality set {}: member {:?} has the same bias component as the set mean, set skipped",
                    set.identity, set.index, store.vocab()[idx[m]]
                ));
                for &i in &idx {
                    if status[i] != WordStatus::Equalized {
                        status[i] = WordStatus::SkippedDegenerate;
                    }
                }
            }
        }
    }

    let mut counts = StatusCounts::default();
    for s in &status {
        match s {
            WordStatus::Neutralized => counts.neutralized += 1,
            WordStatus::Equalized => counts.equalized += 1,
            WordStatus::SkippedOov => counts.skipped_oov += 1,
            WordStatus::SkippedDegenerate => counts.skipped_degenerate += 1,
        }
    }
    let statuses = store.vocab().iter().cloned().zip(status).collect();
    let pass = PassReport {
        identities: subspaces.iter().map(|s| s.identity.clone()).collect(),
        subspaces: subspaces.iter().map(BiasSubspace::export).collect(),
        rank: basis.len(),
        counts,
        statuses,
    };
    (store.with_matrix(matrix), pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Identity;
    use approx::assert_abs_diff_eq;

    #[test]
    fn neutralize_hand_case() {
        let out = neutralize(&[0.6, 0.8], &[vec![1.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(out[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn neutralize_fixed_point_and_degenerate() {
        let w = [0.0, 0.6, 0.8];
        assert_eq!(neutralize(&w, &[vec![1.0, 0.0, 0.0]]).unwrap(), w.to_vec());
        assert!(neutralize(&[1.0, 0.0], &[vec![1.0, 0.0]]).is_none());
    }

    #[test]
    fn equalize_symmetric_pair() {
        let basis = vec![vec![1.0, 0.0]];
        let eq = equalize(&[&[1.0, 0.0], &[-1.0, 0.0]], &basis).unwrap();
        assert_eq!(eq.vectors, vec![vec![1.0, 0.0], vec![-1.0, 0.0]]);
        assert!(!eq.clamped);
    }

    #[test]
    fn equalize_mirror_images_are_fixed() {
        let (a, b) = (0.6_f64, 0.8_f64);
        let basis = vec![vec![1.0, 0.0, 0.0]];
        let w1 = [b, a, 0.0];
        let w2 = [-b, a, 0.0];
        let eq = equalize(&[&w1, &w2], &basis).unwrap();
        for (x, y) in eq.vectors[0].iter().zip(&w1) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        for (x, y) in eq.vectors[1].iter().zip(&w2) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn equalize_skips() {
        let basis = vec![vec![1.0, 0.0]];
        assert_eq!(equalize(&[&[1.0, 0.0]], &basis), Err(EqualizeSkip::TooFew));
        // Both members project to the same point in the subspace.
        assert_eq!(
            equalize(&[&[0.6, 0.8], &[0.6, -0.8]], &basis),
            Err(EqualizeSkip::Degenerate(0))
        );
    }

    fn fixture() -> (EmbeddingStore<f64>, IdentityTaxonomy) {
        let words = ["he", "she", "doctor", "nurse", "pure"];
        let rows = vec![
            vec![1.0, 0.2, 0.1],
            vec![-1.0, 0.2, 0.1],
            vec![0.3, 0.9, 0.2],
            vec![-0.4, 0.5, 0.6],
            vec![1.0, 0.0, 0.0],
        ];
        let store = EmbeddingStore::new(words.iter().map(|s| s.to_string()).collect(), rows).unwrap();
        let tax = IdentityTaxonomy::validated(vec![Identity {
            name: "gender".into(),
            groups: vec![],
            defining_sets: vec![vec!["he".into(), "she".into()]],
            equality_sets: vec![vec!["he".into(), "she".into()], vec!["king".into(), "queen".into()]],
        }])
        .unwrap();
        (store, tax)
    }

    #[test]
    fn single_pass_statuses() {
        let (store, tax) = fixture();
        let plan = DebiasPlan::new(DebiasMode::Single("gender".into())).with_k(1);
        let (out, report) = hard_debias(&store, &tax, &plan).unwrap();
        assert_eq!(out.vocab(), store.vocab());
        let pass = &report.passes[0];
        assert_eq!(pass.statuses.len(), store.len());
        assert_eq!(pass.statuses["he"], WordStatus::Equalized);
        assert_eq!(pass.statuses["doctor"], WordStatus::Neutralized);
        assert_eq!(pass.statuses["pure"], WordStatus::SkippedDegenerate);
        assert_eq!(out.get("pure").unwrap(), store.get("pure").unwrap());
        assert!(report.warnings.iter().any(|w| w.contains("king")));
        assert!(report.warnings.iter().any(|w| w.contains("fewer than 2")));
        let doctor = out.get("doctor").unwrap();
        assert!(linalg::dot(doctor, &[1.0, 0.0, 0.0]).abs() < 1e-12);
    }

    #[test]
    fn plan_validation() {
        let (store, tax) = fixture();
        let bad = DebiasPlan::new(DebiasMode::Single("race".into()));
        assert!(matches!(hard_debias(&store, &tax, &bad), Err(Error::UnknownIdentity(_))));
        let dup = DebiasPlan::new(DebiasMode::Joint(vec!["gender".into(), "gender".into()]));
        assert!(matches!(hard_debias(&store, &tax, &dup), Err(Error::DuplicateIdentity(_))));
        let empty = DebiasPlan::new(DebiasMode::Sequential(vec![]));
        assert!(matches!(hard_debias(&store, &tax, &empty), Err(Error::Empty(_))));
    }
}
