use std::cmp::Ordering;
use std::collections::HashSet;

use serde::Serialize;

use crate::embedding::{normalize_token, EmbeddingStore};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Largest `|x - y|` for a candidate pair.
pub const DEFAULT_ANALOGY_DELTA: f64 = 1.0;

/// "a is to x as b is to y".
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analogy<T> {
    pub x: String,
    pub y: String,
    pub score: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analogies<T> {
    pub pairs: Vec<Analogy<T>>,
    /// Pool words not in the store.
    pub skipped: Vec<String>,
}

/// Ranks ordered pairs from `pool` by `cos(a - b, x - y)`.
///
/// Pairs touching `a` or `b`, pairs farther apart than `delta`, and pairs
/// with `x - y = 0` are excluded. Ties are broken by `(x, y)`.
pub fn top_analogies<T: Scalar, S: AsRef<str>>(
    store: &EmbeddingStore<T>,
    pair: (&str, &str),
    pool: &[S],
    n: usize,
    delta: T,
) -> Result<Analogies<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("analogy count must be at least 1".into()));
    }
    let a = store.get(pair.0).ok_or_else(|| Error::OutOfVocabulary(pair.0.to_string()))?;
    let b = store.get(pair.1).ok_or_else(|| Error::OutOfVocabulary(pair.1.to_string()))?;
    let direction = linalg::sub(a, b);
    if linalg::norm(&direction) == T::zero() {
        return Err(Error::ZeroNorm);
    }

    let excluded: HashSet<String> = [normalize_token(pair.0), normalize_token(pair.1)].into();
    let mut seen = HashSet::new();
    let mut words = Vec::new();
    let mut skipped = Vec::new();
    for w in pool {
        let w = normalize_token(w.as_ref());
        if !seen.insert(w.clone()) {
            continue;
        }
        match store.get(&w) {
            Some(v) => {
                if !excluded.contains(&w) {
                    words.push((w, v));
                }
            }
            None => skipped.push(w),
        }
    }
    if words.is_empty() {
        return Err(Error::Empty("analogy candidate pool has no usable in-vocabulary words".into()));
    }

    let pairs = rank_analogies(&direction, &words, n, delta);
    Ok(Analogies { pairs, skipped })
}

/// Ranks ordered candidate pairs by `cos(direction, x - y)`.
///
/// Only differences between candidates enter the score, so translating
/// every candidate by the same vector leaves the ranking unchanged.
pub fn rank_analogies<T: Scalar, V: AsRef<[T]>>(
    direction: &[T],
    candidates: &[(String, V)],
    n: usize,
    delta: T,
) -> Vec<Analogy<T>> {
    let dir_norm = linalg::norm(direction);
    let eps = T::lit(1e-12);
    let mut pairs = Vec::new();
    for (x, vx) in candidates {
        for (y, vy) in candidates {
            let diff = linalg::sub(vx.as_ref(), vy.as_ref());
            let dn = linalg::norm(&diff);
            if dn <= eps || dn > delta {
                continue;
            }
            pairs.push(Analogy {
                x: x.clone(),
                y: y.clone(),
                score: linalg::dot(direction, &diff) / (dir_norm * dn),
            });
        }
    }
    pairs.sort_by(|p, q| {
        q.score
            .partial_cmp(&p.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| (&p.x, &p.y).cmp(&(&q.x, &q.y)))
    });
    pairs.truncate(n);
    pairs
}
