//! Classifier-side commands: train-fair, gen-data.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use debias_core::fairness::{
    evaluate, generate_synthetic, train_constrained, train_unconstrained, write_trace_csv, BiasReport,
    ClassifierParams, ConstraintConfig, ConstraintMode, Hyperparams, LabeledDataset, Multiplier,
    SyntheticSpec, TrainOutcome,
};
use serde::Serialize;

use crate::io::{create, write_json};
use crate::manifest::Recorder;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Uniform,
    Joint,
    /// No fairness constraints.
    None,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset CSV: `id,label,<identity>:<group>...,f0..`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "joint")]
    mode: TrainMode,
    /// FNR deviation tolerance; `inf` disables the constraint.
    #[arg(long, default_value_t = 0.02)]
    tau_fnr: f64,
    #[arg(long, default_value_t = 0.03)]
    tau_fpr: f64,
    /// Restrict constraints to these identities (comma separated).
    #[arg(long, value_delimiter = ',')]
    identities: Vec<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Smoothing sharpness of the surrogate rates.
    #[arg(long)]
    beta: Option<f64>,
    /// Dual ascent step for the multipliers.
    #[arg(long)]
    penalty_step: Option<f64>,
    /// Quadratic penalty weight.
    #[arg(long)]
    penalty_weight: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    /// Fraction of rows held out for the test report (0 trains on everything).
    #[arg(long, default_value_t = 0.3)]
    test_fraction: f64,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Also write the trained parameters as JSON.
    #[arg(long)]
    params: Option<PathBuf>,
}

impl TrainArgs {
    fn hyperparams(&self) -> Hyperparams {
        let d = Hyperparams::default();
        Hyperparams {
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            penalty_step: self.penalty_step.unwrap_or(d.penalty_step),
            penalty_weight: self.penalty_weight.unwrap_or(d.penalty_weight),
            beta: self.beta.unwrap_or(d.beta),
            seed: self.seed.unwrap_or(d.seed),
            patience: self.patience.unwrap_or(d.patience),
            threshold: d.threshold,
        }
    }

    fn constraints(&self) -> Option<ConstraintConfig> {
        let mode = match self.mode {
            TrainMode::Uniform => ConstraintMode::Uniform,
            TrainMode::Joint => ConstraintMode::Joint,
            TrainMode::None => return None,
        };
        Some(ConstraintConfig {
            mode,
            tau_fnr: self.tau_fnr,
            tau_fpr: self.tau_fpr,
            identities: (!self.identities.is_empty()).then(|| self.identities.clone()),
        })
    }
}

#[derive(Serialize)]
struct TrainReport<'a> {
    mode: TrainMode,
    constraints: Option<ConstraintConfig>,
    hyperparams: &'a Hyperparams,
    test_fraction: f64,
    train_rows: usize,
    test_rows: usize,
    unsatisfiable: bool,
    diverged: bool,
    returned_epoch: usize,
    epochs_run: usize,
    multipliers: &'a [Multiplier],
    params: &'a ClassifierParams,
    train: BiasReport<f64>,
    test: Option<BiasReport<f64>>,
}

fn fit(a: &TrainArgs, hyper: &Hyperparams) -> Result<(LabeledDataset, LabeledDataset, TrainOutcome)> {
    let data = LabeledDataset::load_csv(&a.data).with_context(|| format!("dataset {}", a.data.display()))?;
    let (train, test) = data.split(a.test_fraction, hyper.seed)?;
    log::info!("training on {} rows, holding out {}", train.len(), test.len());
    let outcome = match a.constraints() {
        Some(c) => train_constrained(&train, &c, hyper)?,
        None => train_unconstrained(&train, hyper)?,
    };
    Ok((train, test, outcome))
}

pub fn train(a: TrainArgs, mut rec: Recorder) -> Result<()> {
    let hyper = a.hyperparams();
    let (train, test, outcome) = match fit(&a, &hyper) {
        Ok(r) => r,
        Err(e) => {
            // The trace is always written, header only when nothing ran.
            let mut w = create(&a.trace)?;
            write_trace_csv(&[], &mut w)?;
            w.flush()?;
            return Err(e);
        }
    };
    let mut w = create(&a.trace)?;
    outcome.write_trace_csv(&mut w)?;
    w.flush().with_context(|| format!("writing {}", a.trace.display()))?;
    drop(w);

    if outcome.unsatisfiable {
        log::warn!(
            "constraints were not met; returning the least-violating parameters (epoch {})",
            outcome.returned_epoch
        );
    }
    if outcome.diverged {
        log::warn!("training diverged; returning the last finite parameters");
    }
    let report = TrainReport {
        mode: a.mode,
        constraints: a.constraints(),
        hyperparams: &hyper,
        test_fraction: a.test_fraction,
        train_rows: train.len(),
        test_rows: test.len(),
        unsatisfiable: outcome.unsatisfiable,
        diverged: outcome.diverged,
        returned_epoch: outcome.returned_epoch,
        epochs_run: outcome.trace.len(),
        multipliers: &outcome.multipliers,
        params: &outcome.params,
        train: evaluate(&outcome.params, &train)?,
        test: if test.is_empty() { None } else { Some(evaluate(&outcome.params, &test)?) },
    };
    write_json(&a.report, &report)?;

    rec.seed(hyper.seed);
    rec.config(&serde_json::json!({
        "mode": a.mode,
        "constraints": a.constraints(),
        "hyperparams": hyper,
        "test_fraction": a.test_fraction,
    }))?;
    rec.input(&a.data);
    rec.output(&a.trace);
    rec.output(&a.report);
    if let Some(p) = &a.params {
        write_json(p, &outcome.params)?;
        rec.output(p);
    }
    rec.finish(&a.report)?;
    Ok(())
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

pub fn gen_data(a: GenArgs, mut rec: Recorder) -> Result<()> {
    let spec = SyntheticSpec::load(&a.spec).with_context(|| format!("synthetic spec {}", a.spec.display()))?;
    let data = generate_synthetic(&spec, a.seed)?;
    let mut w = create(&a.out)?;
    data.write_csv(&mut w)?;
    w.flush().with_context(|| format!("writing {}", a.out.display()))?;
    drop(w);
    log::info!("wrote {} rows to {}", data.len(), a.out.display());

    rec.seed(a.seed);
    rec.config(&spec)?;
    rec.input(&a.spec);
    rec.output(&a.out);
    rec.finish(&a.out)?;
    Ok(())
}
