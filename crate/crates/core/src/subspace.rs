//! Bias subspace identification, joint subspaces and projections.
//!
//! An identity's subspace is spanned by the top principal components of its
//! defining-set words after each set is centred on its own mean. Joint
//! subspaces stack the per-identity bases; because those bases are not
//! mutually orthogonal, the stack is orthonormalised before anything is
//! projected onto it.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingStore, Identity};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Number of principal components kept per identity unless overridden.
pub const DEFAULT_K: usize = 2;

/// Residual norm below which a joint-basis row counts as linearly dependent.
pub const JOINT_DROP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct BiasSubspace<T> {
    pub identity: String,
    /// `k` orthonormal rows of length `d`.
    pub basis: Vec<Vec<T>>,
    /// Scatter eigenvalues, descending, one per basis row.
    pub eigenvalues: Vec<T>,
    /// Defining-set words that were not in the store.
    pub oov: Vec<String>,
}

impl<T: Scalar> BiasSubspace<T> {
    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.basis.first().map_or(0, Vec::len)
    }

    pub fn export(&self) -> SubspaceExport {
        SubspaceExport {
            identity: self.identity.clone(),
            k: self.k(),
            d: self.dim(),
            basis: self.basis.iter().flatten().map(|x| x.to_f64_lossy()).collect(),
            eigenvalues: self.eigenvalues.iter().map(|x| x.to_f64_lossy()).collect(),
        }
    }
}

/// JSON form of a subspace: `basis` is row-major `k x d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceExport {
    pub identity: String,
    pub k: usize,
    pub d: usize,
    pub basis: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

impl SubspaceExport {
    pub fn to_subspace<T: Scalar>(&self) -> Result<BiasSubspace<T>> {
        if self.basis.len() != self.k * self.d || self.eigenvalues.len() != self.k {
            return Err(Error::Schema(format!(
                "subspace {:?}: basis/eigenvalue lengths do not match k={} d={}",
                self.identity, self.k, self.d
            )));
        }
        Ok(BiasSubspace {
            identity: self.identity.clone(),
            basis: self
                .basis
                .chunks(self.d.max(1))
                .map(|r| r.iter().map(|&x| T::lit(x)).collect())
                .collect(),
            eigenvalues: self.eigenvalues.iter().map(|&x| T::lit(x)).collect(),
            oov: Vec::new(),
        })
    }
}

/// Top-`k` principal directions of already-centred rows.
///
/// Eigendecomposes the unnormalised scatter matrix `X^T X`. Components are
/// ordered by descending eigenvalue (stable for ties) and signed so that
/// their largest-magnitude coordinate is positive.
pub fn principal_components<T: Scalar>(rows: &[Vec<T>], k: usize) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    let d = rows.first().map_or(0, Vec::len);
    if k == 0 {
        return Err(Error::InvalidK { k, reason: "must be positive".into() });
    }
    if k > d {
        return Err(Error::InvalidK { k, reason: format!("exceeds dimension {d}") });
    }
    if k > rows.len() {
        return Err(Error::InvalidK {
            k,
            reason: format!("exceeds number of centred vectors {}", rows.len()),
        });
    }

    let mut scatter = vec![T::zero(); d * d];
    for r in rows {
        if r.len() != d {
            return Err(Error::Dim { expected: d, got: r.len() });
        }
        for i in 0..d {
            let ri = r[i];
            if ri == T::zero() {
                continue;
            }
            for j in i..d {
                scatter[i * d + j] += ri * r[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            scatter[i * d + j] = scatter[j * d + i];
        }
    }

    let (values, vectors) = linalg::symmetric_eigen(&scatter, d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal));

    let mut basis = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let mut v = vectors[i].clone();
        orient(&mut v);
        basis.push(v);
        // Scatter is PSD; round-off can leave tiny negatives.
        eigenvalues.push(if values[i] < T::zero() && values[i] > -T::lit(1e-12) {
            T::zero()
        } else {
            values[i]
        });
    }
    Ok((basis, eigenvalues))
}

/// Flips `v` so its largest-magnitude coordinate (first on ties) is positive.
fn orient<T: Scalar>(v: &mut [T]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < T::zero() {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Centres each defining set on its mean and stacks the results.
pub fn centered_defining_vectors<T: Scalar>(
    store: &EmbeddingStore<T>,
    identity: &Identity,
) -> Result<(Vec<Vec<T>>, Vec<String>)> {
    let mut stacked = Vec::new();
    let mut oov = Vec::new();
    for (set_idx, set) in identity.defining_sets.iter().enumerate() {
        let resolved = store.resolve_words(set);
        if resolved.found.len() < 2 {
            return Err(Error::UnderResolvedSet {
                identity: identity.name.clone(),
                set: set_idx,
                resolved: resolved.found.len(),
            });
        }
        let members: Vec<&[T]> = resolved.found.iter().map(|(_, v)| v.as_slice()).collect();
        let mu = linalg::mean(&members);
        stacked.extend(members.iter().map(|w| linalg::sub(w, &mu)));
        oov.extend(resolved.missing);
    }
    Ok((stacked, oov))
}

/// PCA bias subspace of one identity.
pub fn identify_subspace<T: Scalar>(
    store: &EmbeddingStore<T>,
    identity: &Identity,
    k: usize,
) -> Result<BiasSubspace<T>> {
    if k > store.dim() {
        return Err(Error::InvalidK { k, reason: format!("exceeds dimension {}", store.dim()) });
    }
    let (stacked, oov) = centered_defining_vectors(store, identity)?;
    let (basis, eigenvalues) = principal_components(&stacked, k)?;
    Ok(BiasSubspace {
        identity: identity.name.clone(),
        basis,
        eigenvalues,
        oov,
    })
}

/// Concatenation of several identities' subspaces.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSubspace<T> {
    /// `(identity, k_t)` in concatenation order.
    pub sources: Vec<(String, usize)>,
    /// Raw row concatenation of the source bases.
    pub basis: Vec<Vec<T>>,
    /// Orthonormal rows spanning `basis`.
    pub orthonormal: Vec<Vec<T>>,
}

impl<T: Scalar> JointSubspace<T> {
    pub fn rank(&self) -> usize {
        self.orthonormal.len()
    }
}

pub fn join_subspaces<T: Scalar>(subspaces: &[BiasSubspace<T>]) -> Result<JointSubspace<T>> {
    let first = subspaces
        .first()
        .ok_or_else(|| Error::Empty("no subspaces to join".into()))?;
    let d = first.dim();
    let mut seen = HashSet::new();
    let mut basis = Vec::new();
    let mut sources = Vec::new();
    for s in subspaces {
        if s.dim() != d {
            return Err(Error::Dim { expected: d, got: s.dim() });
        }
        if !seen.insert(s.identity.as_str()) {
            return Err(Error::DuplicateIdentity(s.identity.clone()));
        }
        sources.push((s.identity.clone(), s.k()));
        basis.extend(s.basis.iter().cloned());
    }
    let (orthonormal, _) = linalg::gram_schmidt(&basis, T::lit(JOINT_DROP_TOL));
    Ok(JointSubspace {
        sources,
        basis,
        orthonormal,
    })
}

/// Component of `w` inside the span of the orthonormal rows of `basis`.
pub fn project<T: Scalar>(w: &[T], basis: &[Vec<T>]) -> Result<Vec<T>> {
    check_dims(w.len(), basis)?;
    Ok(project_unchecked(w, basis))
}

pub(crate) fn project_unchecked<T: Scalar>(w: &[T], basis: &[Vec<T>]) -> Vec<T> {
    let mut out = vec![T::zero(); w.len()];
    for b in basis {
        linalg::axpy(linalg::dot(w, b), b, &mut out);
    }
    out
}

pub(crate) fn check_dims<T>(d: usize, basis: &[Vec<T>]) -> Result<()> {
    match basis.iter().find(|b| b.len() != d) {
        Some(b) => Err(Error::Dim { expected: d, got: b.len() }),
        None => Ok(()),
    }
}

/// Principal angles between the spans of two orthonormal row sets, ascending.
///
/// Cosines come from the singular values of `A B^T`. Angles whose cosine
/// exceeds `1/sqrt(2)` are recomputed from sines (singular values of the
/// part of the smaller basis orthogonal to the larger one), which keeps
/// near-zero angles accurate.
pub fn principal_angles<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> Result<Vec<T>> {
    let d = a.first().map_or(0, Vec::len);
    check_dims(d, a)?;
    check_dims(d, b)?;
    let (big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let q = small.len();
    if q == 0 {
        return Ok(Vec::new());
    }

    let cross = linalg::mul_transpose(small, big);
    let cosines = linalg::singular_values(&cross);

    let residual: Vec<Vec<T>> = small
        .iter()
        .zip(&cross)
        .map(|(row, coeffs)| {
            let mut r = row.clone();
            for (c, q) in coeffs.iter().zip(big) {
                linalg::axpy(-*c, q, &mut r);
            }
            r
        })
        .collect();
    let mut sines = linalg::singular_values(&residual);
    sines.reverse();

    let half = T::lit(0.5);
    let clamp = |x: T| x.max(T::zero()).min(T::one());
    Ok((0..q)
        .map(|i| {
            let c = clamp(cosines[i]);
            if c * c > half {
                clamp(sines[i]).asin()
            } else {
                c.acos()
            }
        })
        .collect())
}
