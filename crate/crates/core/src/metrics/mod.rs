//! Bias-removal metrics: cosine distance, MAC, paired t-tests, analogies
//! and store-to-store comparison reports.

mod analogy;
mod compare;
mod mac;
mod ttest;

pub use analogy::{rank_analogies, top_analogies, Analogies, Analogy, DEFAULT_ANALOGY_DELTA};
pub use compare::{compare_report, ComparisonReport, ComparisonRow};
pub use mac::{cosine_distance, mac, mac_from_vectors, MacResult};
pub use ttest::{
    ln_gamma, paired_t_test, paired_t_test_matrices, regularized_incomplete_beta, students_t_cdf,
    TTestResult,
};
