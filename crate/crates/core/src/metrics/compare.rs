use std::io::Write;

use serde::Serialize;

use super::mac::{mac, MacResult};
use super::ttest::{paired_t_test, TTestResult};
use crate::embedding::{EmbeddingStore, EvalSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub store: String,
    pub identity: String,
    pub mac: f64,
    /// `mac - mac(first store)`.
    pub mac_delta: f64,
    /// Against the first (baseline) store.
    pub test: TTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub stores: Vec<String>,
    pub identities: Vec<String>,
    /// Identity-major: all stores for the first identity, then the next.
    pub rows: Vec<ComparisonRow>,
    pub warnings: Vec<String>,
}

/// Per-identity MAC for every store, each paired-tested against the first.
///
/// Evaluation words are restricted to those present in every store so the
/// per-pair distance matrices line up.
pub fn compare_report<T: Scalar>(
    stores: &[(String, &EmbeddingStore<T>)],
    evals: &[(String, EvalSpec)],
) -> Result<ComparisonReport> {
    if stores.len() < 2 {
        return Err(Error::InvalidArgument("comparison needs at least two stores".into()));
    }
    let in_all = |w: &String| stores.iter().all(|(_, s)| s.contains(w));
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    for (identity, eval) in evals {
        let targets: Vec<String> = eval.targets.iter().filter(|w| in_all(w)).cloned().collect();
        let sets: Vec<Vec<String>> = eval
            .attribute_sets
            .iter()
            .map(|s| s.iter().filter(|w| in_all(w)).cloned().collect::<Vec<_>>())
            .filter(|s| !s.is_empty())
            .collect();
        let dropped = eval.targets.len() - targets.len()
            + eval.attribute_sets.iter().map(Vec::len).sum::<usize>()
            - sets.iter().map(Vec::len).sum::<usize>();
        if dropped > 0 {
            warnings.push(format!(
                "identity {identity:?}: {dropped} evaluation word(s) missing from at least one store were skipped"
            ));
        }
        if targets.is_empty() || sets.is_empty() {
            return Err(Error::Empty(format!(
                "evaluation spec for {identity:?} does not resolve in every store"
            )));
        }
        let common = EvalSpec {
            targets,
            attribute_sets: sets,
        };
        let results = stores
            .iter()
            .map(|(_, s)| mac(*s, &common))
            .collect::<Result<Vec<MacResult<T>>>>()?;
        let base = results[0].flat_distances();
        let base_mac = results[0].mac.to_f64_lossy();
        for ((name, _), r) in stores.iter().zip(&results) {
            let m = r.mac.to_f64_lossy();
            rows.push(ComparisonRow {
                store: name.clone(),
                identity: identity.clone(),
                mac: m,
                mac_delta: m - base_mac,
                test: paired_t_test(&base, &r.flat_distances())
                    .or_else(|_| single_cell_test(&base, &r.flat_distances()))?,
            });
        }
    }
    Ok(ComparisonReport {
        stores: stores.iter().map(|(n, _)| n.clone()).collect(),
        identities: evals.iter().map(|(n, _)| n.clone()).collect(),
        rows,
        warnings,
    })
}

/// A 1x1 distance matrix has no degrees of freedom; report it as untestable.
fn single_cell_test(before: &[f64], after: &[f64]) -> Result<TTestResult> {
    if before.len() != 1 || after.len() != 1 {
        return Err(Error::InvalidArgument("distance matrices differ in shape".into()));
    }
    Ok(TTestResult {
        t_statistic: 0.0,
        degrees_of_freedom: 0,
        p_value: 1.0,
        significant_at_0_05: false,
        mean_difference: after[0] - before[0],
        degenerate_variance: true,
    })
}

impl ComparisonReport {
    /// CSV with columns `store,identity,mac,t_stat,p_value,significant`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["store", "identity", "mac", "t_stat", "p_value", "significant"])?;
        for r in &self.rows {
            wr.write_record([
                r.store.clone(),
                r.identity.clone(),
                fmt17(r.mac),
                fmt17(r.test.t_statistic),
                fmt17(r.test.p_value),
                r.test.significant_at_0_05.to_string(),
            ])?;
        }
        wr.flush().map_err(Error::Stream)?;
        Ok(())
    }
}

/// 17 significant digits.
pub(crate) fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
