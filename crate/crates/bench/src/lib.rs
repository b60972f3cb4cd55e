//! Fixed inputs shared by the benchmarks.

use fibration_forge::sampling::{random_no_real_eigen, rng_from_seed};
use fibration_forge::RealLinearMap;

/// A reproducible map on `R^dim` with no eigenvalue near the real axis.
pub fn fixture_map(dim: usize, seed: u64) -> RealLinearMap {
    random_no_real_eigen(&mut rng_from_seed(seed), dim, 3.0, 0.05)
}
