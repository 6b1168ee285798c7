//! Fixtures shared by the benchmarks.

use ordscore_core::{Dataset, FeasibleSet, Instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Binary features, three categories, a mix of singleton and interval labels.
pub fn random_dataset(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..n)
        .map(|_| {
            let x = (0..p).map(|_| rng.random_range(0..2) as f64).collect();
            let lo = rng.random_range(1..=3);
            let hi = rng.random_range(lo..=3);
            Instance::new(x, FeasibleSet::from_categories(lo..=hi).unwrap(), 1.0).unwrap()
        })
        .collect();
    Dataset::unnamed(instances, p, 3).unwrap()
}

/// Scores on a coarse grid (many ties) with Bernoulli labels.
pub fn random_scores(seed: u64, n: usize) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (0..n).map(|_| rng.random_range(0..40) as f64).collect::<Vec<_>>();
    let y = s.iter().map(|v| rng.random_bool((v / 40.0).clamp(0.05, 0.95))).collect();
    (s, y)
}
