//! Shared fixtures for the benchmark targets.

use ddsc_core::rng::stream_rng;
use ddsc_core::synth::{generate, ProfileSpec};
use ddsc_core::types::{ApplianceDataset, Dictionary, TrainConfig};

/// A weekly synthetic dataset sized for benchmarking.
pub fn bench_dataset(houses: usize, weeks: usize) -> ApplianceDataset {
    generate(&ProfileSpec::default(), houses, weeks, 1234).expect("valid spec")
}

/// A random unit-norm dictionary matching the dataset's window length.
pub fn bench_dictionary(window_len: usize, n_bases: usize) -> Dictionary {
    let mut rng = stream_rng(1234, 77);
    ddsc_core::nnsc::random_dictionary(window_len, n_bases, &mut rng).expect("valid dims")
}

/// A small config so benches finish quickly.
pub fn bench_config() -> TrainConfig {
    TrainConfig {
        n_bases: 16,
        lambda: 0.1,
        alpha: 1e-3,
        nnsc_max_iters: 5,
        dd_max_iters: 3,
        solver_max_iters: 100,
        tol: 1e-5,
        seed: 1234,
        ..TrainConfig::default()
    }
}
