#![allow(dead_code)]

use debias_core::{Embeddings, Identity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z
        })
        .collect()
}

pub fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v = gaussian(rng, d);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// `k` orthonormal rows via the QR factorisation of a Gaussian matrix.
pub fn orthonormal_rows(rng: &mut ChaCha8Rng, k: usize, d: usize) -> Vec<Vec<f64>> {
    let m = nalgebra::DMatrix::from_fn(d, k, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z
    });
    let q = m.qr().q();
    (0..k).map(|j| q.column(j).iter().copied().collect()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Store of `n` random unit vectors named `w0..`.
pub fn random_store(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Embeddings {
    let vocab = (0..n).map(|i| format!("w{i}")).collect();
    let rows = (0..n).map(|_| gaussian(rng, d)).collect();
    Embeddings::new(vocab, rows).unwrap()
}

pub fn words(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

pub fn identity(name: &str, defining: &[&[&str]]) -> Identity {
    let sets: Vec<Vec<String>> = defining.iter().map(|s| words(s)).collect();
    Identity {
        name: name.into(),
        groups: vec![],
        equality_sets: sets.clone(),
        defining_sets: sets,
    }
}

pub fn pick<T: Clone>(rng: &mut ChaCha8Rng, items: &[T], n: usize) -> Vec<T> {
    (0..n).map(|_| items[rng.random_range(0..items.len())].clone()).collect()
}
