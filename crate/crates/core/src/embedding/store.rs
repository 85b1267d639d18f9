use std::collections::HashMap;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Canonical form used for every token comparison (Unicode NFC, case kept).
pub fn normalize_token(token: &str) -> String {
    token.nfc().collect()
}

/// Vocabulary-indexed matrix of unit-norm word vectors.
///
/// Immutable once built; debiasing produces new stores.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore<T> {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Vec<T>,
    dim: usize,
}

/// Order-preserving split of a word list into in- and out-of-vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved<T> {
    pub found: Vec<(String, Vec<T>)>,
    pub missing: Vec<String>,
}

impl<T> Resolved<T> {
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.found.iter().map(|(w, _)| w.as_str())
    }
}

impl<T: Scalar> EmbeddingStore<T> {
    /// Builds a store from raw rows, L2-normalising each one.
    pub fn new(vocab: Vec<String>, rows: Vec<Vec<T>>) -> Result<Self> {
        if vocab.len() != rows.len() {
            return Err(Error::InvalidArgument(format!(
                "{} tokens but {} rows",
                vocab.len(),
                rows.len()
            )));
        }
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let mut matrix = Vec::with_capacity(rows.len() * dim);
        for (line, (token, mut row)) in vocab.iter().zip(rows).enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    line: line + 2,
                    expected: dim,
                    found: row.len(),
                });
            }
            normalize_row(token, &mut row)?;
            matrix.extend(row);
        }
        Self::from_parts(vocab, matrix, dim)
    }

    /// Builds a store from rows that are already unit norm (not re-normalised).
    pub(crate) fn from_parts(vocab: Vec<String>, matrix: Vec<T>, dim: usize) -> Result<Self> {
        if dim == 0 && !vocab.is_empty() {
            return Err(Error::MalformedHeader("dimension must be at least 1".into()));
        }
        debug_assert_eq!(matrix.len(), vocab.len() * dim);
        let mut index = HashMap::with_capacity(vocab.len());
        let mut canon = Vec::with_capacity(vocab.len());
        for (i, token) in vocab.into_iter().enumerate() {
            let token = normalize_token(&token);
            if index.insert(token.clone(), i).is_some() {
                return Err(Error::DuplicateToken(token));
            }
            canon.push(token);
        }
        Ok(EmbeddingStore {
            vocab: canon,
            index,
            matrix,
            dim,
        })
    }

    /// Same vocabulary, new (unit-norm) matrix.
    pub(crate) fn with_matrix(&self, matrix: Vec<T>) -> Self {
        assert_eq!(matrix.len(), self.matrix.len());
        EmbeddingStore {
            vocab: self.vocab.clone(),
            index: self.index.clone(),
            matrix,
            dim: self.dim,
        }
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn matrix(&self) -> &[T] {
        &self.matrix
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index
            .get(word)
            .or_else(|| self.index.get(&normalize_token(word)))
            .copied()
    }

    pub fn get(&self, word: &str) -> Option<&[T]> {
        self.index_of(word).map(|i| self.row(i))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index_of(word).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[T])> {
        self.vocab
            .iter()
            .enumerate()
            .map(move |(i, w)| (w.as_str(), self.row(i)))
    }

    /// Partitions `words` into found vectors and missing words, keeping order.
    pub fn resolve_words<S: AsRef<str>>(&self, words: &[S]) -> Resolved<T> {
        let mut found = Vec::new();
        let mut missing = Vec::new();
        for w in words {
            let w = w.as_ref();
            match self.index_of(w) {
                Some(i) => found.push((self.vocab[i].clone(), self.row(i).to_vec())),
                None => missing.push(w.to_string()),
            }
        }
        Resolved { found, missing }
    }

    /// Converts every entry to another scalar type.
    pub fn cast<U: Scalar>(&self) -> EmbeddingStore<U> {
        EmbeddingStore {
            vocab: self.vocab.clone(),
            index: self.index.clone(),
            matrix: self.matrix.iter().map(|&x| U::lit(x.to_f64_lossy())).collect(),
            dim: self.dim,
        }
    }
}

fn normalize_row<T: Scalar>(token: &str, row: &mut [T]) -> Result<()> {
    if row.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(token.to_string()));
    }
    let n = linalg::norm(row);
    if n == T::zero() {
        return Err(Error::ZeroVector(token.to_string()));
    }
    linalg::scale(T::one() / n, row);
    Ok(())
}
