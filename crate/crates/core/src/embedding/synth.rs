//! Embedding fixtures with planted, optionally overlapping bias directions.
//!
//! Every identity `t` gets a unit direction `u_t` orthogonal to a shared
//! topic direction `c`. The first identity's direction is drawn freely;
//! later ones sit at a chosen angle to it. Words are built as
//!
//! - defining word, group sign `s`: `topic * c + s * bias * u_t + pair offset + noise`
//! - attribute word of set `j`: `topic * c + s_j * attribute_bias * u_t + noise`
//! - filler word: pure noise
//!
//! and normalized on insertion into the store. Defining pairs double as
//! equality sets and as MAC targets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::lexicon::{EvalSpec, Identity, IdentityTaxonomy};
use super::store::EmbeddingStore;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedIdentity {
    pub name: String,
    /// Exactly two groups, placed at `+u_t` and `-u_t`.
    pub groups: [String; 2],
    /// Angle in degrees between this identity's direction and the first
    /// identity's. Ignored for the first identity; `None` means orthogonal.
    pub angle_to_first: Option<f64>,
}

impl PlantedIdentity {
    pub fn new(name: &str, a: &str, b: &str, angle_to_first: Option<f64>) -> Self {
        PlantedIdentity {
            name: name.into(),
            groups: [a.into(), b.into()],
            angle_to_first,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub dim: usize,
    pub identities: Vec<PlantedIdentity>,
    pub defining_pairs: usize,
    pub attributes_per_set: usize,
    pub filler_words: usize,
    pub topic: f64,
    pub bias: f64,
    pub attribute_bias: f64,
    pub pair_offset: f64,
    /// Per-coordinate standard deviation of the isotropic noise.
    pub noise: f64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            dim: 50,
            identities: vec![
                PlantedIdentity::new("gender", "female", "male", None),
                PlantedIdentity::new("race", "black", "white", Some(20.0)),
                PlantedIdentity::new("religion", "christian", "muslim", Some(60.0)),
            ],
            defining_pairs: 4,
            attributes_per_set: 6,
            filler_words: 200,
            topic: 0.6,
            bias: 1.0,
            attribute_bias: 0.5,
            pair_offset: 0.1,
            noise: 0.05,
        }
    }
}

/// Generated store plus the lexicons describing it.
#[derive(Debug, Clone)]
pub struct PlantedFixture {
    pub store: EmbeddingStore<f64>,
    pub taxonomy: IdentityTaxonomy,
    /// One evaluation per identity, in declaration order.
    pub evals: Vec<(String, EvalSpec)>,
    pub topic: Vec<f64>,
    pub directions: Vec<(String, Vec<f64>)>,
}

pub fn defining_word(identity: &str, group: &str, i: usize) -> String {
    format!("{identity}_{group}_{i}")
}

pub fn attribute_word(identity: &str, set: usize, i: usize) -> String {
    format!("{identity}_attr{set}_{i}")
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize, sd: f64) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        })
        .collect()
}

/// `n` random orthonormal vectors in `R^d`.
fn orthonormal_frame(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Vec<Vec<f64>> {
    loop {
        let raw: Vec<Vec<f64>> = (0..n).map(|_| gaussian(rng, d, 1.0)).collect();
        let (basis, kept) = linalg::gram_schmidt(&raw, 1e-6);
        if kept.iter().all(|&k| k) {
            return basis;
        }
    }
}

pub fn planted_fixture(spec: &PlantedSpec, seed: u64) -> Result<PlantedFixture> {
    let n_id = spec.identities.len();
    if n_id == 0 {
        return Err(Error::InvalidArgument("at least one identity is required".into()));
    }
    if spec.dim < n_id + 2 {
        return Err(Error::InvalidArgument(format!(
            "dim must be at least {} for {n_id} identities",
            n_id + 2
        )));
    }
    if spec.defining_pairs == 0 || spec.attributes_per_set == 0 {
        return Err(Error::InvalidArgument(
            "defining_pairs and attributes_per_set must be positive".into(),
        ));
    }
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // frame[0] = topic, frame[1] = first identity, frame[1 + t] = free part of identity t
    let frame = orthonormal_frame(&mut rng, d, n_id + 1);
    let topic = frame[0].clone();
    let mut directions = Vec::with_capacity(n_id);
    for (t, id) in spec.identities.iter().enumerate() {
        let u = if t == 0 {
            frame[1].clone()
        } else {
            let theta = id.angle_to_first.unwrap_or(90.0).to_radians();
            frame[1]
                .iter()
                .zip(&frame[1 + t])
                .map(|(a, b)| theta.cos() * a + theta.sin() * b)
                .collect()
        };
        directions.push((id.name.clone(), u));
    }

    let mut vocab = Vec::new();
    let mut rows = Vec::new();
    let mut identities = Vec::new();
    let mut evals = Vec::new();
    let word = |parts: &[(f64, &[f64])], noise: Vec<f64>| -> Vec<f64> {
        let mut w = noise;
        for (coef, v) in parts {
            linalg::axpy(*coef, v, &mut w);
        }
        w
    };

    for (t, id) in spec.identities.iter().enumerate() {
        let u = &directions[t].1;
        let mut defining_sets = Vec::new();
        for i in 0..spec.defining_pairs {
            let offset = gaussian(&mut rng, d, spec.pair_offset / (d as f64).sqrt());
            let mut set = Vec::new();
            for (g, sign) in id.groups.iter().zip([1.0, -1.0]) {
                let noise = gaussian(&mut rng, d, spec.noise);
                rows.push(word(&[(spec.topic, &topic), (sign * spec.bias, u), (1.0, &offset)], noise));
                let name = defining_word(&id.name, g, i);
                vocab.push(name.clone());
                set.push(name);
            }
            defining_sets.push(set);
        }
        let mut attribute_sets = Vec::new();
        for (j, sign) in [1.0, -1.0].into_iter().enumerate() {
            let mut set = Vec::new();
            for i in 0..spec.attributes_per_set {
                let noise = gaussian(&mut rng, d, spec.noise);
                rows.push(word(&[(spec.topic, &topic), (sign * spec.attribute_bias, u)], noise));
                let name = attribute_word(&id.name, j, i);
                vocab.push(name.clone());
                set.push(name);
            }
            attribute_sets.push(set);
        }
        let targets = defining_sets.iter().flatten().cloned().collect();
        evals.push((id.name.clone(), EvalSpec::new(targets, attribute_sets)?));
        identities.push(Identity {
            name: id.name.clone(),
            groups: id.groups.to_vec(),
            equality_sets: defining_sets.clone(),
            defining_sets,
        });
    }
    for i in 0..spec.filler_words {
        vocab.push(format!("filler_{i}"));
        rows.push(gaussian(&mut rng, d, 1.0));
    }

    Ok(PlantedFixture {
        store: EmbeddingStore::new(vocab, rows)?,
        taxonomy: IdentityTaxonomy::validated(identities)?,
        evals,
        topic,
        directions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_have_requested_angles() {
        let fx = planted_fixture(&PlantedSpec::default(), 3).unwrap();
        let g = &fx.directions[0].1;
        let r = &fx.directions[1].1;
        let cos = linalg::dot(g, r);
        assert!((cos - 20f64.to_radians().cos()).abs() < 1e-12);
        assert!(linalg::dot(&fx.topic, r).abs() < 1e-12);
        assert_eq!(fx.taxonomy.identities.len(), 3);
        assert_eq!(fx.store.len(), 3 * (8 + 12) + 200);
    }

    #[test]
    fn seeded() {
        let a = planted_fixture(&PlantedSpec::default(), 9).unwrap();
        let b = planted_fixture(&PlantedSpec::default(), 9).unwrap();
        assert_eq!(a.store, b.store);
    }

    #[test]
    fn rejects_small_dim() {
        let spec = PlantedSpec {
            dim: 3,
            ..Default::default()
        };
        assert!(planted_fixture(&spec, 1).is_err());
    }
}
