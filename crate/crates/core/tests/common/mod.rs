#![allow(dead_code)]

use std::path::PathBuf;

use deinterleave::clustering::{cluster_embeddings, HdbscanConfig};
use deinterleave::pdw::{LabelVector, Partition};
use serde::Deserialize;

#[derive(Deserialize)]
pub struct HdbscanCase {
    pub name: String,
    pub dim: usize,
    pub points: Vec<f64>,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub labels: Vec<i64>,
}

#[derive(Deserialize)]
struct FixtureFile {
    cases: Vec<HdbscanCase>,
}

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn hdbscan_cases() -> Vec<HdbscanCase> {
    let text = std::fs::read_to_string(fixture_path("hdbscan_fixtures.json")).expect("fixture file");
    serde_json::from_str::<FixtureFile>(&text).expect("fixture json").cases
}

/// Whether our clustering of `case` equals the reference partition, noise
/// points included.
pub fn hdbscan_case_matches(case: &HdbscanCase) -> bool {
    let cfg = HdbscanConfig::new(case.min_cluster_size).with_min_samples(case.min_samples);
    let got = cluster_embeddings(&case.points, case.dim, &cfg).expect("clustering");
    let want = LabelVector::new(case.labels.clone());
    same_noise(&got, &want) && Partition::from_labels(&got) == Partition::from_labels(&want)
}

fn same_noise(a: &LabelVector, b: &LabelVector) -> bool {
    a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| (*x < 0) == (*y < 0))
}

/// Two Gaussian blobs of 50 points, spread 0.1, centres 10 apart.
pub fn two_blobs(seed: u64) -> Vec<f64> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut pts = Vec::new();
    for centre in [0.0, 10.0] {
        for _ in 0..50 {
            pts.push(centre + noise.sample(&mut rng));
            pts.push(noise.sample(&mut rng));
        }
    }
    pts
}

pub mod oracles;
