//! Embedding-side commands: debias, audit, inspect-subspace, analogies.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use debias_core::debias::{hard_debias, DebiasMode, DebiasPlan};
use debias_core::embedding::{load_embeddings, load_eval_spec, load_taxonomy, save_embeddings, EvalSpec};
use debias_core::metrics::{compare_report, top_analogies, DEFAULT_ANALOGY_DELTA};
use debias_core::subspace::{identify_subspace, join_subspaces, principal_angles, SubspaceExport, DEFAULT_K};
use debias_core::Embeddings;
use serde::Serialize;

use crate::io::{create, file_stem, read_words, write_json};
use crate::manifest::Recorder;
use crate::FormatArg;

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Single,
    Sequential,
    Joint,
}

#[derive(Args)]
pub struct DebiasArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Comma-separated identity names, in pass order for sequential mode.
    #[arg(long, value_delimiter = ',', required = true)]
    identities: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    taxonomy: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Defaults to the extension of `--in` (`.bin` is binary).
    #[arg(long, value_enum)]
    in_format: Option<FormatArg>,
    #[arg(long, value_enum)]
    out_format: Option<FormatArg>,
}

fn load_store(path: &Path, format: Option<FormatArg>) -> Result<Embeddings> {
    let store = load_embeddings(path, FormatArg::resolve(format, path))
        .with_context(|| format!("embeddings {}", path.display()))?;
    log::info!("loaded {} words of dimension {} from {}", store.len(), store.dim(), path.display());
    Ok(store)
}

pub fn debias(a: DebiasArgs, mut rec: Recorder) -> Result<()> {
    let taxonomy = load_taxonomy(&a.taxonomy).with_context(|| format!("taxonomy {}", a.taxonomy.display()))?;
    let store = load_store(&a.input, a.in_format)?;
    let mode = match a.mode {
        ModeArg::Single => {
            let [id] = a.identities.as_slice() else {
                bail!("single mode takes exactly one identity, got {}", a.identities.len());
            };
            DebiasMode::Single(id.clone())
        }
        ModeArg::Sequential => DebiasMode::Sequential(a.identities.clone()),
        ModeArg::Joint => DebiasMode::Joint(a.identities.clone()),
    };
    let plan = DebiasPlan::new(mode).with_k(a.k);
    let (out, report) = hard_debias(&store, &taxonomy, &plan)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    save_embeddings(&out, &a.out, FormatArg::resolve(a.out_format, &a.out))?;
    write_json(&a.report, &report)?;

    rec.config(&plan)?;
    rec.input(&a.input);
    rec.input(&a.taxonomy);
    rec.output(&a.out);
    rec.output(&a.report);
    rec.finish(&a.out)?;
    Ok(())
}

#[derive(Args)]
pub struct AuditArgs {
    /// Stores to compare against the baseline (repeatable).
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
    /// Evaluation spec per identity; the identity is the file stem minus any `eval_` prefix.
    #[arg(long = "eval", required = true)]
    evals: Vec<PathBuf>,
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the full report, t-test details included, as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn store_names(paths: &[&Path]) -> Vec<String> {
    let stems: Vec<String> = paths.iter().map(|p| file_stem(p)).collect();
    let unique = stems.iter().enumerate().all(|(i, s)| !stems[..i].contains(s));
    if unique {
        stems
    } else {
        paths.iter().map(|p| p.display().to_string()).collect()
    }
}

pub fn audit(a: AuditArgs, mut rec: Recorder) -> Result<()> {
    let evals: Vec<(String, EvalSpec)> = a
        .evals
        .iter()
        .map(|p| {
            let stem = file_stem(p);
            let identity = stem.strip_prefix("eval_").unwrap_or(&stem).to_string();
            let spec = load_eval_spec(p).with_context(|| format!("eval spec {}", p.display()))?;
            Ok((identity, spec))
        })
        .collect::<Result<_>>()?;
    let paths: Vec<&Path> = std::iter::once(a.baseline.as_path())
        .chain(a.inputs.iter().map(PathBuf::as_path))
        .collect();
    let stores: Vec<Embeddings> = paths.iter().map(|p| load_store(p, None)).collect::<Result<_>>()?;
    let named: Vec<(String, &Embeddings)> = store_names(&paths).into_iter().zip(&stores).collect();
    let report = compare_report(&named, &evals)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let mut w = create(&a.out)?;
    report.write_csv(&mut w)?;
    drop(w);

    for p in &paths {
        rec.input(p);
    }
    for p in &a.evals {
        rec.input(p);
    }
    rec.output(&a.out);
    if let Some(json) = &a.json {
        write_json(json, &report)?;
        rec.output(json);
    }
    rec.finish(&a.out)?;
    Ok(())
}

#[derive(Args)]
pub struct InspectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    taxonomy: PathBuf,
    /// Defaults to every identity in the taxonomy.
    #[arg(long, value_delimiter = ',')]
    identities: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct AnglePair {
    a: String,
    b: String,
    /// Principal angles in degrees, ascending.
    degrees: Vec<f64>,
}

#[derive(Serialize)]
struct Inspection {
    subspaces: Vec<SubspaceExport>,
    oov: Vec<(String, Vec<String>)>,
    angles: Vec<AnglePair>,
    joint_rank: usize,
    raw_rows: usize,
}

pub fn inspect(a: InspectArgs, mut rec: Recorder) -> Result<()> {
    let taxonomy = load_taxonomy(&a.taxonomy).with_context(|| format!("taxonomy {}", a.taxonomy.display()))?;
    let store = load_store(&a.input, None)?;
    let names: Vec<String> = if a.identities.is_empty() {
        taxonomy.names().map(String::from).collect()
    } else {
        a.identities.clone()
    };
    let subspaces = names
        .iter()
        .map(|n| identify_subspace(&store, taxonomy.identity(n)?, a.k))
        .collect::<debias_core::Result<Vec<_>>>()?;
    let mut angles = Vec::new();
    for (i, s) in subspaces.iter().enumerate() {
        for t in &subspaces[i + 1..] {
            let radians = principal_angles(&s.basis, &t.basis)?;
            angles.push(AnglePair {
                a: s.identity.clone(),
                b: t.identity.clone(),
                degrees: radians.iter().map(|r| r.to_degrees()).collect(),
            });
        }
    }
    let joint = join_subspaces(&subspaces)?;
    let inspection = Inspection {
        oov: subspaces
            .iter()
            .filter(|s| !s.oov.is_empty())
            .map(|s| (s.identity.clone(), s.oov.clone()))
            .collect(),
        subspaces: subspaces.iter().map(|s| s.export()).collect(),
        angles,
        joint_rank: joint.rank(),
        raw_rows: joint.basis.len(),
    };
    write_json(&a.out, &inspection)?;

    rec.config(&serde_json::json!({ "identities": names, "k": a.k }))?;
    rec.input(&a.input);
    rec.input(&a.taxonomy);
    rec.output(&a.out);
    rec.finish(&a.out)?;
    Ok(())
}

#[derive(Args)]
pub struct AnalogyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Seed pair `a,b`, read as "a is to x as b is to y".
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pair: Vec<String>,
    /// Candidate words, whitespace separated.
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Largest allowed distance between x and y.
    #[arg(long, default_value_t = DEFAULT_ANALOGY_DELTA)]
    delta: f64,
    #[arg(long)]
    out: PathBuf,
}

pub fn analogies(a: AnalogyArgs, mut rec: Recorder) -> Result<()> {
    let [x, y] = a.pair.as_slice() else {
        bail!("--pair takes two comma-separated words, got {}", a.pair.len());
    };
    let store = load_store(&a.input, None)?;
    let pool = read_words(&a.pool)?;
    let found = top_analogies(&store, (x, y), &pool, a.n, a.delta)
        .with_context(|| format!("analogies for ({x}, {y})"))?;
    if !found.skipped.is_empty() {
        log::warn!("{} pool word(s) not in the store: {}", found.skipped.len(), found.skipped.join(" "));
    }
    let mut w = csv::Writer::from_writer(create(&a.out)?);
    w.write_record(["rank", "a", "x", "b", "y", "score"])?;
    for (i, p) in found.pairs.iter().enumerate() {
        w.write_record([&(i + 1).to_string(), x, &p.x, y, &p.y, &format!("{:.16e}", p.score)])?;
    }
    w.flush()?;
    drop(w);

    rec.config(&serde_json::json!({ "pair": [x, y], "n": a.n, "delta": a.delta }))?;
    rec.input(&a.input);
    rec.input(&a.pool);
    rec.output(&a.out);
    rec.finish(&a.out)?;
    Ok(())
}
