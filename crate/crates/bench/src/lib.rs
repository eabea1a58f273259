//! Shared fixtures for the benchmarks.

use naggs_core::problems::{make_test_matrix, synthetic_blobs, LogisticRegressionProblem, Quadratic};
use naggs_core::rng;

/// Random quadratic with spectrum in `[1, 10]` and minimiser `e`.
pub fn quadratic(dim: usize) -> Quadratic {
    make_test_matrix(1.0, 10.0, dim, 1).expect("valid spectrum").with_shift(1.0)
}

pub fn logistic(n_per_class: usize, n_features: usize) -> LogisticRegressionProblem {
    synthetic_blobs(n_per_class, n_features, 3.0, 1e-3, 2).expect("valid blobs")
}

/// `n` standard normal draws.
pub fn normal_sample(n: usize, seed: u64) -> Vec<f64> {
    rng::standard_normal_vec(&mut rng::stream(seed, 0), n)
}

/// `n` standard normal start points in `dim` dimensions.
pub fn start_points(n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| rng::standard_normal_vec(&mut rng::stream(3, i as u64), dim)).collect()
}
