//! Logistic toxicity classifier trained under FNR/FPR deviation constraints.
//!
//! Constraints `|rate_ref - rate_G| < tau` are enforced through an
//! augmented penalty on sigmoid-smoothed rates. A prediction indicator
//! `1[z > 0]` is replaced by `sigmoid(beta * z)` on the decision margin
//! `z`, which makes every group rate differentiable in the parameters.
//! Each constraint carries a multiplier updated by projected dual ascent
//! once per epoch.
//!
//! In uniform mode the reference is the global rate; in joint mode it is
//! the rate over rows belonging to any group of the constrained group's
//! own identity.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{GroupKey, LabeledDataset};
use super::rates::{auc, BiasReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    /// Every group against the global rate.
    Uniform,
    /// Every group against its identity's rate.
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintConfig {
    pub mode: ConstraintMode,
    pub tau_fnr: f64,
    pub tau_fpr: f64,
    /// Identities whose groups are constrained; `None` means all.
    #[serde(default)]
    pub identities: Option<Vec<String>>,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        ConstraintConfig {
            mode: ConstraintMode::Joint,
            tau_fnr: 0.02,
            tau_fpr: 0.03,
            identities: None,
        }
    }
}

impl ConstraintConfig {
    fn validate(&self) -> Result<()> {
        for (name, tau) in [("tau_fnr", self.tau_fnr), ("tau_fpr", self.tau_fpr)] {
            if tau.is_nan() || tau < 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {tau}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Dual ascent step for the multipliers.
    pub penalty_step: f64,
    /// Weight of the quadratic part of the augmented penalty.
    pub penalty_weight: f64,
    /// Sharpness of the smoothed prediction indicator.
    pub beta: f64,
    pub seed: u64,
    /// Epochs without improvement of the constraint excess before giving up.
    pub patience: usize,
    pub threshold: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.05,
            epochs: 25,
            batch_size: 256,
            penalty_step: 20.0,
            penalty_weight: 10.0,
            beta: 10.0,
            seed: 7,
            patience: 5,
            threshold: 0.5,
        }
    }
}

impl Hyperparams {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs and batch_size must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidArgument("threshold must lie in (0, 1)".into()));
        }
        if !(self.learning_rate > 0.0 && self.beta > 0.0 && self.penalty_step >= 0.0 && self.penalty_weight >= 0.0) {
            return Err(Error::InvalidArgument(
                "learning_rate and beta must be positive, penalty terms non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
}

impl ClassifierParams {
    pub fn zeros(dim: usize, threshold: f64) -> Self {
        ClassifierParams {
            weights: vec![0.0; dim],
            bias: 0.0,
            threshold,
        }
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.probability(x) >= self.threshold
    }

    pub fn predict_all(&self, data: &LabeledDataset) -> Vec<bool> {
        (0..data.len()).map(|r| self.predict(data.features(r))).collect()
    }

    pub fn scores(&self, data: &LabeledDataset) -> Vec<f64> {
        (0..data.len()).map(|r| self.probability(data.features(r))).collect()
    }

    fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    /// Decision margin: positive iff the row is predicted toxic.
    fn margin(&self, x: &[f64]) -> f64 {
        self.logit(x) - (self.threshold / (1.0 - self.threshold)).ln()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(-z))` for a positive row, `log(1 + exp(z))` for a negative one.
fn logistic_loss(z: f64, y: bool) -> f64 {
    let m = if y { -z } else { z };
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

/// Mean logistic loss over the dataset.
pub fn mean_loss(params: &ClassifierParams, data: &LabeledDataset) -> f64 {
    let total: f64 = (0..data.len())
        .map(|r| logistic_loss(params.logit(data.features(r)), data.labels[r]))
        .sum();
    total / data.len().max(1) as f64
}

pub fn evaluate(params: &ClassifierParams, data: &LabeledDataset) -> Result<BiasReport<f64>> {
    let predictions = params.predict_all(data);
    BiasReport::from_predictions(
        &predictions,
        data,
        params.threshold,
        auc(&params.scores(data), &data.labels),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
enum RateKind {
    Fnr,
    Fpr,
}

/// Populations: 0 is everyone, then one per identity, then one per group.
struct Populations {
    n_identities: usize,
    row_pops: Vec<Vec<usize>>,
    positives: Vec<usize>,
    negatives: Vec<usize>,
}

impl Populations {
    fn new(data: &LabeledDataset) -> Self {
        let identities = data.identities();
        let members: Vec<Vec<usize>> = identities.iter().map(|i| data.groups_of(i)).collect();
        let n_pops = 1 + identities.len() + data.groups.len();
        let mut positives = vec![0; n_pops];
        let mut negatives = vec![0; n_pops];
        let row_pops: Vec<Vec<usize>> = (0..data.len())
            .map(|r| {
                let mut pops = vec![0];
                for (t, groups) in members.iter().enumerate() {
                    if data.in_any(r, groups) {
                        pops.push(1 + t);
                    }
                }
                for g in 0..data.groups.len() {
                    if data.is_member(r, g) {
                        pops.push(1 + identities.len() + g);
                    }
                }
                for &p in &pops {
                    if data.labels[r] {
                        positives[p] += 1;
                    } else {
                        negatives[p] += 1;
                    }
                }
                pops
            })
            .collect();
        Populations {
            n_identities: identities.len(),
            row_pops,
            positives,
            negatives,
        }
    }

    fn group(&self, g: usize) -> usize {
        1 + self.n_identities + g
    }
}

#[derive(Debug, Clone)]
struct Constraint {
    label: String,
    kind: RateKind,
    reference: usize,
    population: usize,
    tau: f64,
}

fn build_constraints(
    data: &LabeledDataset,
    pops: &Populations,
    config: &ConstraintConfig,
) -> Result<Vec<Constraint>> {
    let identities = data.identities();
    let scope: Vec<String> = match &config.identities {
        Some(ids) => {
            for id in ids {
                if !identities.contains(id) {
                    return Err(Error::UnknownIdentity(id.clone()));
                }
            }
            ids.clone()
        }
        None => identities.clone(),
    };
    let mut out = Vec::new();
    for (t, identity) in identities.iter().enumerate() {
        if !scope.contains(identity) {
            continue;
        }
        let reference = match config.mode {
            ConstraintMode::Uniform => 0,
            ConstraintMode::Joint => 1 + t,
        };
        for g in data.groups_of(identity) {
            let p = pops.group(g);
            let key = &data.groups[g];
            if pops.positives[p] == 0 || pops.negatives[p] == 0 {
                return Err(Error::Dataset(format!(
                    "constrained group {key} needs at least one positive and one negative row"
                )));
            }
            out.push(Constraint {
                label: format!("{key} FNR"),
                kind: RateKind::Fnr,
                reference,
                population: p,
                tau: config.tau_fnr,
            });
            out.push(Constraint {
                label: format!("{key} FPR"),
                kind: RateKind::Fpr,
                reference,
                population: p,
                tau: config.tau_fpr,
            });
        }
    }
    Ok(out)
}

/// Smoothed rates per population and their gradients in `(weights, bias)`.
struct Surrogate {
    fnr: Vec<f64>,
    fpr: Vec<f64>,
    d_fnr: Vec<Vec<f64>>,
    d_fpr: Vec<Vec<f64>>,
}

fn surrogate(params: &ClassifierParams, data: &LabeledDataset, pops: &Populations, beta: f64, grad: bool) -> Surrogate {
    let n_pops = pops.positives.len();
    let dp = data.dim() + 1;
    let mut miss = vec![0.0; n_pops];
    let mut false_alarm = vec![0.0; n_pops];
    let mut g_pos = vec![vec![0.0; if grad { dp } else { 0 }]; n_pops];
    let mut g_neg = vec![vec![0.0; if grad { dp } else { 0 }]; n_pops];
    for r in 0..data.len() {
        let x = data.features(r);
        let s = sigmoid(beta * params.margin(x));
        let ds = beta * s * (1.0 - s);
        let y = data.labels[r];
        for &p in &pops.row_pops[r] {
            if y {
                miss[p] += 1.0 - s;
            } else {
                false_alarm[p] += s;
            }
            if grad && ds != 0.0 {
                let acc = if y { &mut g_pos[p] } else { &mut g_neg[p] };
                for (a, xi) in acc.iter_mut().zip(x) {
                    *a += ds * xi;
                }
                acc[dp - 1] += ds;
            }
        }
    }
    let ratio = |num: f64, den: usize| if den == 0 { 0.0 } else { num / den as f64 };
    Surrogate {
        fnr: (0..n_pops).map(|p| ratio(miss[p], pops.positives[p])).collect(),
        fpr: (0..n_pops).map(|p| ratio(false_alarm[p], pops.negatives[p])).collect(),
        d_fnr: g_pos
            .into_iter()
            .enumerate()
            .map(|(p, g)| g.into_iter().map(|v| -ratio(v, pops.positives[p])).collect())
            .collect(),
        d_fpr: g_neg
            .into_iter()
            .enumerate()
            .map(|(p, g)| g.into_iter().map(|v| ratio(v, pops.negatives[p])).collect())
            .collect(),
    }
}

impl Constraint {
    /// `(rate_ref - rate_group)` and its gradient if requested.
    fn deviation(&self, s: &Surrogate) -> f64 {
        match self.kind {
            RateKind::Fnr => s.fnr[self.reference] - s.fnr[self.population],
            RateKind::Fpr => s.fpr[self.reference] - s.fpr[self.population],
        }
    }

    fn deviation_grad<'a>(&self, s: &'a Surrogate) -> (&'a [f64], &'a [f64]) {
        match self.kind {
            RateKind::Fnr => (&s.d_fnr[self.reference], &s.d_fnr[self.population]),
            RateKind::Fpr => (&s.d_fpr[self.reference], &s.d_fpr[self.population]),
        }
    }
}

/// Penalty value and, when `grad` is given, its gradient added into `grad`.
fn penalty(
    constraints: &[Constraint],
    s: &Surrogate,
    multipliers: &[f64],
    weight: f64,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let mut value = 0.0;
    for (c, &lambda) in constraints.iter().zip(multipliers) {
        let dev = c.deviation(s);
        let excess = dev.abs() - c.tau;
        if excess > 0.0 {
            value += lambda * excess + 0.5 * weight * excess * excess;
            if let Some(g) = grad.as_deref_mut() {
                let coeff = (lambda + weight * excess) * dev.signum();
                let (g_ref, g_grp) = c.deviation_grad(s);
                for ((gi, a), b) in g.iter_mut().zip(g_ref).zip(g_grp) {
                    *gi += coeff * (a - b);
                }
            }
        }
    }
    value
}

/// Smoothed rates for inspection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurrogateRates {
    pub fnr: f64,
    pub fpr: f64,
    pub identities: Vec<(String, f64, f64)>,
    pub groups: Vec<(GroupKey, f64, f64)>,
}

pub fn surrogate_rates(params: &ClassifierParams, data: &LabeledDataset, beta: f64) -> SurrogateRates {
    let pops = Populations::new(data);
    let s = surrogate(params, data, &pops, beta, false);
    SurrogateRates {
        fnr: s.fnr[0],
        fpr: s.fpr[0],
        identities: data
            .identities()
            .into_iter()
            .enumerate()
            .map(|(t, id)| (id, s.fnr[1 + t], s.fpr[1 + t]))
            .collect(),
        groups: data
            .groups
            .iter()
            .enumerate()
            .map(|(g, k)| (k.clone(), s.fnr[pops.group(g)], s.fpr[pops.group(g)]))
            .collect(),
    }
}

/// Mean logistic loss plus the constraint penalty at fixed multipliers.
pub fn penalized_objective(
    params: &ClassifierParams,
    data: &LabeledDataset,
    config: &ConstraintConfig,
    multipliers: &[f64],
    hyper: &Hyperparams,
) -> Result<f64> {
    let pops = Populations::new(data);
    let constraints = build_constraints(data, &pops, config)?;
    if multipliers.len() != constraints.len() {
        return Err(Error::Dim {
            expected: constraints.len(),
            got: multipliers.len(),
        });
    }
    let s = surrogate(params, data, &pops, hyper.beta, false);
    Ok(mean_loss(params, data) + penalty(&constraints, &s, multipliers, hyper.penalty_weight, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub loss: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub fned_j: f64,
    pub fped_j: f64,
    pub total_bias: f64,
    /// Sum over constraints of `max(0, |dev| - tau)` on smoothed rates.
    pub surrogate_excess: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub constraint: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub params: ClassifierParams,
    pub trace: Vec<EpochTrace>,
    pub multipliers: Vec<Multiplier>,
    /// Epoch whose parameters were returned (0 = initial parameters).
    pub returned_epoch: usize,
    /// Constraints were never met on the smoothed rates; training stops
    /// early once the excess has not improved for `patience` epochs.
    /// `params` are then the least-violating seen; otherwise they come
    /// from the latest epoch that met the constraints.
    pub unsatisfiable: bool,
    /// Loss became non-finite; `params` are the last finite ones.
    pub diverged: bool,
}

impl TrainOutcome {
    /// Trace CSV: `epoch,loss,f1,accuracy,fned_j,fped_j,total_bias`.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        write_trace_csv(&self.trace, w)
    }
}

pub fn write_trace_csv<W: Write>(trace: &[EpochTrace], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["epoch", "loss", "f1", "accuracy", "fned_j", "fped_j", "total_bias"])?;
    for t in trace {
        let f = |x: f64| format!("{x:.16e}");
        wr.write_record([
            t.epoch.to_string(),
            f(t.loss),
            f(t.f1),
            f(t.accuracy),
            f(t.fned_j),
            f(t.fped_j),
            f(t.total_bias),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Plain logistic regression with the same optimiser and batching.
pub fn train_unconstrained(data: &LabeledDataset, hyper: &Hyperparams) -> Result<TrainOutcome> {
    fit(data, Vec::new(), &Populations::new(data), hyper)
}

pub fn train_constrained(
    data: &LabeledDataset,
    config: &ConstraintConfig,
    hyper: &Hyperparams,
) -> Result<TrainOutcome> {
    config.validate()?;
    let pops = Populations::new(data);
    let constraints = build_constraints(data, &pops, config)?;
    fit(data, constraints, &pops, hyper)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, params: &mut ClassifierParams, grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let d = params.weights.len();
        for (i, &g) in grad.iter().enumerate() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g;
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g * g;
            let update = lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
            if i < d {
                params.weights[i] -= update;
            } else {
                params.bias -= update;
            }
        }
    }
}

fn fit(
    data: &LabeledDataset,
    constraints: Vec<Constraint>,
    pops: &Populations,
    hyper: &Hyperparams,
) -> Result<TrainOutcome> {
    hyper.validate()?;
    if data.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    let d = data.dim();
    let mut params = ClassifierParams::zeros(d, hyper.threshold);
    let mut adam = Adam {
        m: vec![0.0; d + 1],
        v: vec![0.0; d + 1],
        t: 0,
    };
    let mut multipliers = vec![0.0; constraints.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();

    let mut trace = Vec::with_capacity(hyper.epochs);
    let mut last_stable = (0usize, params.clone());
    let mut best: Option<(f64, usize, ClassifierParams)> = None;
    let mut ever_feasible = constraints.is_empty();
    let mut last_feasible: Option<(usize, ClassifierParams)> = None;
    let mut stale = 0usize;
    let mut diverged = false;
    let mut gave_up = false;

    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hyper.batch_size) {
            let mut grad = vec![0.0; d + 1];
            for &r in batch {
                let x = data.features(r);
                let err = sigmoid(params.logit(x)) - if data.labels[r] { 1.0 } else { 0.0 };
                for (g, xi) in grad.iter_mut().zip(x) {
                    *g += err * xi;
                }
                grad[d] += err;
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if !constraints.is_empty() {
                let s = surrogate(&params, data, pops, hyper.beta, true);
                penalty(&constraints, &s, &multipliers, hyper.penalty_weight, Some(&mut grad));
            }
            adam.step(&mut params, &grad, hyper.learning_rate);
        }

        let loss = mean_loss(&params, data);
        if !loss.is_finite() || !params.is_finite() {
            log::warn!("training diverged at epoch {epoch}; keeping epoch {} parameters", last_stable.0);
            diverged = true;
            break;
        }

        let s = surrogate(&params, data, pops, hyper.beta, false);
        let pen = penalty(&constraints, &s, &multipliers, hyper.penalty_weight, None);
        let mut excess = 0.0;
        for (c, lambda) in constraints.iter().zip(multipliers.iter_mut()) {
            let v = c.deviation(&s).abs();
            excess += (v - c.tau).max(0.0);
            *lambda = (*lambda + hyper.penalty_step * (v - c.tau)).max(0.0);
        }

        let report = evaluate(&params, data)?;
        trace.push(EpochTrace {
            epoch,
            loss,
            f1: report.f1,
            accuracy: report.accuracy,
            fned_j: report.joint.fned,
            fped_j: report.joint.fped,
            total_bias: report.joint.total,
            surrogate_excess: excess,
            penalty: pen,
        });
        last_stable = (epoch, params.clone());

        let feasible = excess <= 0.0;
        let improved = best.as_ref().is_none_or(|(b, _, _)| excess < *b);
        if improved {
            best = Some((excess, epoch, params.clone()));
        }
        if feasible {
            ever_feasible = true;
            last_feasible = Some((epoch, params.clone()));
        }
        // Once the constraints have been met the run is never abandoned.
        stale = if ever_feasible || improved { 0 } else { stale + 1 };
        if !constraints.is_empty() && stale >= hyper.patience.max(1) {
            log::warn!("constraint excess stalled for {stale} epochs; stopping at epoch {epoch}");
            gave_up = true;
            break;
        }
    }

    let unsatisfiable = !constraints.is_empty() && (gave_up || !ever_feasible);
    let (returned_epoch, params) = match (diverged, unsatisfiable, best, last_feasible) {
        (true, ..) => last_stable,
        (false, true, Some((_, e, p)), _) => (e, p),
        (false, false, _, Some(f)) => f,
        _ => last_stable,
    };
    Ok(TrainOutcome {
        params,
        trace,
        multipliers: constraints
            .iter()
            .zip(multipliers)
            .map(|(c, value)| Multiplier {
                constraint: c.label.clone(),
                value,
            })
            .collect(),
        returned_epoch,
        unsatisfiable,
        diverged,
    })
}
