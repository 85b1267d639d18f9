//! Fairness-constrained toxicity classification.
//!
//! Rates and equality differences live in [`rates`]; [`train`] fits a
//! logistic classifier under per-group FNR/FPR deviation constraints;
//! [`synth`] generates identity-annotated datasets with planted bias.

mod dataset;
pub mod rates;
pub mod synth;
pub mod train;

pub use dataset::{GroupKey, LabeledDataset};
pub use rates::{
    compute_rates, individual_bias, joint_bias, BiasReport, Confusion, EqualityDifferences, GroupRates,
    IdentityRates, RateTable,
};
pub use synth::{generate_synthetic, GroupRate, SyntheticIdentity, SyntheticSpec};
pub use train::{
    evaluate, mean_loss, penalized_objective, surrogate_rates, train_constrained, train_unconstrained,
    write_trace_csv, ClassifierParams, ConstraintConfig, ConstraintMode, EpochTrace, Hyperparams, Multiplier,
    SurrogateRates, TrainOutcome,
};
