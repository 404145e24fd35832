//! Fixtures shared by the benchmarks.

use lisa_core::{Dataset, Generator, RngStream};

/// Friedman data of size `n` with unit noise, seeded deterministically.
pub fn friedman_fixture(n: usize, seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed, 0);
    Generator::Friedman
        .generate(n, 1.0, &mut rng)
        .expect("fixture generation")
        .dataset
}
