//! HDBSCAN on three Gaussian blobs plus scattered outliers.

use deinterleave::clustering::{cluster_embeddings, HdbscanConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> deinterleave::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let spread = Normal::new(0.0, 0.2).expect("valid");
    let mut points = Vec::new();
    for (cx, cy) in [(0.0, 0.0), (5.0, 0.0), (0.0, 5.0)] {
        for _ in 0..40 {
            points.push(cx + spread.sample(&mut rng));
            points.push(cy + spread.sample(&mut rng));
        }
    }
    for _ in 0..5 {
        points.push(rng.gen_range(-10.0..15.0));
        points.push(rng.gen_range(-10.0..15.0));
    }
    let labels = cluster_embeddings(&points, 2, &HdbscanConfig::new(10))?;
    println!(
        "{} clusters, {} noise points",
        labels.n_clusters(),
        labels.noise_count()
    );
    Ok(())
}
