//! Joint bias mitigation for word embeddings and toxicity classifiers.
//!
//! Two pipelines share this crate:
//!
//! - hard debiasing of static embeddings against per-identity or joint
//!   PCA bias subspaces ([`subspace`], [`debias`]), evaluated with mean
//!   average cosine distance and paired t-tests ([`metrics`]);
//! - logistic toxicity classification under per-group FNR/FPR deviation
//!   constraints, reported with individual and joint equality
//!   differences ([`fairness`]).
//!
//! Geometry is generic over [`Scalar`] (`f32`, `f64`); rate tables are
//! generic over [`RateScalar`], which also admits exact rationals.

pub mod debias;
pub mod embedding;
pub mod error;
pub mod fairness;
pub mod linalg;
pub mod metrics;
pub mod scalar;
pub mod subspace;

pub use debias::{hard_debias, DebiasMode, DebiasPlan, DebiasReport, WordStatus};
pub use embedding::{EmbeddingStore, EvalSpec, Format, Identity, IdentityTaxonomy};
pub use error::{Error, Result};
pub use fairness::{BiasReport, LabeledDataset, RateTable};
pub use scalar::{RateScalar, Scalar};
pub use subspace::{BiasSubspace, JointSubspace};

/// Exact rational used for hand-checkable rate tables.
pub type Rational = num_rational::Ratio<i64>;

pub type Embeddings = EmbeddingStore<f64>;
pub type Embeddings32 = EmbeddingStore<f32>;
pub type Subspace = BiasSubspace<f64>;
pub type Joint = JointSubspace<f64>;
pub type ExactRateTable = RateTable<Rational>;
pub type ExactBiasReport = BiasReport<Rational>;
