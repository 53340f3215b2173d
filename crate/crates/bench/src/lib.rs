//! Seeded fixtures shared by the benchmarks.

use pax_core::data::{generate, SyntheticConfig};
use pax_core::gbt::{FeatureBuckets, GradHessSum};
use pax_core::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn uniform_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1e3..1e3)).collect()
}

/// Per-feature buckets with random statistics and matching thresholds.
pub fn random_buckets(n_features: usize, n_bins: usize, seed: u64) -> (Vec<FeatureBuckets>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buckets = (0..n_features)
        .map(|_| FeatureBuckets {
            bins: (0..n_bins)
                .map(|_| {
                    GradHessSum::new(
                        rng.random_range(-5.0..5.0),
                        rng.random_range(0.1..2.0),
                        rng.random_range(1..20),
                    )
                })
                .collect(),
            missing: GradHessSum::new(rng.random_range(-1.0..1.0), 0.5, 3),
        })
        .collect();
    let thresholds = (0..n_features)
        .map(|_| (0..n_bins).map(|b| b as f64).collect())
        .collect();
    (buckets, thresholds)
}

/// The synthetic pool split into `n_parties` contiguous shares.
pub fn synthetic_parties(n_parties: usize, rows_per_party: usize, seed: u64) -> Vec<Dataset> {
    let data = generate(&SyntheticConfig {
        n_pool: n_parties * rows_per_party,
        n_test: 1,
        seed,
        ..SyntheticConfig::default()
    })
    .expect("valid synthetic config");
    (0..n_parties)
        .map(|p| {
            let idx: Vec<usize> = (p * rows_per_party..(p + 1) * rows_per_party).collect();
            data.pool.subset(&idx).expect("indices in range")
        })
        .collect()
}
