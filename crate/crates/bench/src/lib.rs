//! Shared fixtures for the benchmark suite.

use banditforest::seeding;
use banditforest::{Dataset, Targets};
use rand::Rng;

/// Classification node with one informative feature among noise, the shape
/// where the solvers differ the most.
pub fn heterogeneous_classification(n: usize, noise_features: usize, seed: u64) -> Dataset {
    let mut rng = seeding::rng(seed);
    let informative: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let labels: Vec<u32> = informative.iter().map(|&v| u32::from(v > 0.71)).collect();
    let mut columns = vec![informative];
    for _ in 0..noise_features {
        columns.push((0..n).map(|_| rng.random()).collect());
    }
    Dataset::from_columns(columns, Targets::Classes { labels, n_classes: 2 }, None, "y").unwrap()
}
