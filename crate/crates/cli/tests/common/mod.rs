#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use debias_core::embedding::synth::{planted_fixture, PlantedFixture, PlantedSpec};
use debias_core::embedding::{save_embeddings, Format};
use tempfile::TempDir;

pub fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_debias-kit"))
        .args(args)
        .current_dir(dir)
        .env("DEBIAS_KIT_THREADS", "1")
        .output()
        .expect("spawn debias-kit")
}

pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// A temp directory holding `emb.txt`, `tax.json`, `eval_<identity>.json`
/// and `pool.txt` from the planted fixture.
pub struct Workspace {
    pub dir: TempDir,
    pub fixture: PlantedFixture,
}

impl Workspace {
    pub fn planted(seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let fixture = planted_fixture(&PlantedSpec::default(), seed).unwrap();
        save_embeddings(&fixture.store, &dir.path().join("emb.txt"), Format::Text).unwrap();
        fs::write(
            dir.path().join("tax.json"),
            serde_json::to_string_pretty(&fixture.taxonomy).unwrap(),
        )
        .unwrap();
        for (id, eval) in &fixture.evals {
            fs::write(
                dir.path().join(format!("eval_{id}.json")),
                serde_json::to_string_pretty(eval).unwrap(),
            )
            .unwrap();
        }
        let pool: Vec<&str> = fixture.store.vocab().iter().step_by(7).map(String::as_str).collect();
        fs::write(dir.path().join("pool.txt"), pool.join("\n")).unwrap();
        Workspace { dir, fixture }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

/// Small two-identity dataset spec for fast training runs.
pub fn small_spec(size: usize) -> String {
    format!(
        r#"{{"identities":[{{"name":"gender","groups":["male","female"]}},
                           {{"name":"race","groups":["black","white"]}}],
            "group_rates":{{"gender:male":{{"share":0.4,"toxicity":0.2}},
                            "gender:female":{{"share":0.4,"toxicity":0.4}},
                            "race:black":{{"share":0.3,"toxicity":0.5}},
                            "race:white":{{"share":0.3,"toxicity":0.2}}}},
            "base_toxicity":0.3,"feature_dim":6,"bias_strength":2.0,"size":{size}}}"#
    )
}
